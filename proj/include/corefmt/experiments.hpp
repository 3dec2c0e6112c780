#pragma once

// Experiment drivers: context size, corpus size, cluster pruning and the alpha
// and beta sweeps. Each condition trains (or loads) one model, decodes N-best
// lists for the validation and test windows, tunes beta on validation and
// reports test scores.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "corefmt/config.hpp"
#include "corefmt/corpus.hpp"
#include "corefmt/vocab.hpp"

namespace corefmt {

enum class ExperimentKind { kContext, kCorpusSize, kPruning, kAlpha, kBeta };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& s);
// Grid used when none is given: m = 2..4, sizes 0.25/0.5/1, pruning
// 0/10/20/30/50%, alpha 0.8/1/2/3/4/10, beta -2..2 by 0.5.
std::vector<double> default_grid(ExperimentKind kind);

struct SuiteData {
  std::vector<Document> train;
  std::vector<Document> valid;
  std::vector<Document> test;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kContext;
  std::vector<double> grid;  // empty: default_grid(kind)
  ModelConfig model;
  TrainOptions train;
  std::filesystem::path work_dir;
  // When false a missing checkpoint is an error; otherwise it is trained.
  bool train_missing = false;
  int beam = 5;
};

struct ReportRecord {
  std::string experiment;
  std::string condition;
  std::string metric;
  double value = 0.0;
};

struct Report {
  std::vector<ReportRecord> records;

  // Throws std::out_of_range when absent.
  double value(const std::string& experiment, const std::string& condition, const std::string& metric) const;
  std::vector<std::string> conditions(const std::string& experiment) const;
};

// Condition label for one grid value, e.g. "m=3" or "prune=0.2".
std::string condition_name(ExperimentKind kind, double value);

Report run_experiment_suite(const ExperimentConfig& config, const SuiteData& data);

// One JSON object per line: {"experiment", "condition", "metric", "value"}.
void write_report(std::ostream& out, const Report& report);
Report read_report(std::istream& in);
// Plot-ready table: one row per condition, one column per metric.
void write_report_table(std::ostream& out, const Report& report);

// Windows of every document, in order, with ids "<doc>:<index>".
std::vector<DocumentWindow> windows_of(const std::vector<Document>& docs, int m);
// Vocabulary over the source and target sides of the training windows.
Vocab build_vocab(const std::vector<Document>& docs);

}  // namespace corefmt
