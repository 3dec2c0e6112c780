#include "doctest.h"

#include <filesystem>
#include <sstream>

#include "corefmt/experiments.hpp"
#include "corefmt/model.hpp"
#include "synthetic.hpp"

using namespace corefmt;
namespace fs = std::filesystem;

namespace {

SuiteData tiny_suite() {
  auto docs = corefmt::testing::synthetic_documents({5, 2, 4});
  SuiteData d;
  d.train.assign(docs.begin(), docs.begin() + 3);
  d.valid = {docs[3]};
  d.test = {docs[4]};
  return d;
}

ExperimentConfig tiny_experiment(ExperimentKind kind, std::vector<double> grid, const fs::path& dir) {
  ExperimentConfig c;
  c.kind = kind;
  c.grid = std::move(grid);
  c.model = corefmt::testing::tiny_config();
  c.train.epochs = 1;
  c.train.batch_size = 4;
  c.train.warmup_steps = 2;
  c.work_dir = dir;
  c.beam = 2;
  return c;
}

}  // namespace

TEST_CASE("experiment names and grids") {
  CHECK(default_grid(ExperimentKind::kAlpha) == std::vector<double>{0.8, 1, 2, 3, 4, 10});
  CHECK(default_grid(ExperimentKind::kPruning) == std::vector<double>{0, 0.1, 0.2, 0.3, 0.5});
  CHECK(default_grid(ExperimentKind::kContext) == std::vector<double>{2, 3, 4});
  CHECK(default_grid(ExperimentKind::kBeta).size() == 9);
  CHECK(experiment_kind_from_string("m") == ExperimentKind::kContext);
  CHECK(experiment_kind_from_string("corpus_size") == ExperimentKind::kCorpusSize);
  CHECK_THROWS(experiment_kind_from_string("gamma"));
  CHECK(condition_name(ExperimentKind::kContext, 3) == "m=3");
  CHECK(condition_name(ExperimentKind::kPruning, 0.2) == "prune=0.2");
  CHECK(condition_name(ExperimentKind::kAlpha, 0.8) == "alpha=0.8");
}

TEST_CASE("a missing checkpoint is reported by condition") {
  const auto dir = fs::temp_directory_path() / "corefmt_exp_missing";
  fs::remove_all(dir);
  const auto cfg = tiny_experiment(ExperimentKind::kAlpha, {2.0}, dir);
  CHECK_THROWS_WITH(run_experiment_suite(cfg, tiny_suite()),
                    doctest::Contains("missing checkpoint for condition alpha/alpha=2"));
  SuiteData empty;
  CHECK_THROWS(run_experiment_suite(cfg, empty));
}

TEST_CASE("sweep trains missing conditions, then reuses their checkpoints") {
  const auto dir = fs::temp_directory_path() / "corefmt_exp_run";
  fs::remove_all(dir);
  auto cfg = tiny_experiment(ExperimentKind::kContext, {1, 2}, dir);
  cfg.train_missing = true;
  const auto data = tiny_suite();
  const Report first = run_experiment_suite(cfg, data);
  CHECK(first.conditions("context") == std::vector<std::string>{"m=1", "m=2"});
  for (const char* cond : {"m=1", "m=2"}) {
    CHECK(fs::exists(dir / "context" / cond / "model.ckpt"));
    CHECK(fs::exists(dir / "context" / cond / "test.hyp"));
    CHECK(fs::exists(dir / "context" / cond / "test.nbest"));
    for (const char* metric : {"bleu", "bleu_beam", "bleu_oracle", "beta", "muc_f1"}) {
      const double v = first.value("context", cond, metric);
      CHECK(std::isfinite(v));
    }
    const double beta = first.value("context", cond, "beta");
    CHECK(beta >= -2.0);
    CHECK(beta <= 2.0);
  }
  CHECK(first.value("context", "m=2", "window") == 2.0);

  cfg.train_missing = false;
  const auto before = load_checkpoint(dir / "context" / "m=1" / "model.ckpt").params;
  const Report second = run_experiment_suite(cfg, data);
  CHECK(load_checkpoint(dir / "context" / "m=1" / "model.ckpt").params == before);
  REQUIRE(second.records.size() == first.records.size());
  for (std::size_t i = 0; i < first.records.size(); ++i) CHECK(second.records[i].value == first.records[i].value);
  fs::remove_all(dir);
}

TEST_CASE("pruning conditions share one model") {
  const auto dir = fs::temp_directory_path() / "corefmt_exp_prune";
  fs::remove_all(dir);
  auto cfg = tiny_experiment(ExperimentKind::kPruning, {0.0, 0.5}, dir);
  cfg.train_missing = true;
  const Report r = run_experiment_suite(cfg, tiny_suite());
  CHECK(fs::exists(dir / "pruning" / "base" / "model.ckpt"));
  CHECK_FALSE(fs::exists(dir / "pruning" / "prune=0.5" / "model.ckpt"));
  CHECK(r.value("pruning", "prune=0", "bleu_beam") == r.value("pruning", "prune=0.5", "bleu_beam"));
  fs::remove_all(dir);
}

TEST_CASE("reports round trip and tabulate") {
  Report r;
  r.records = {{"alpha", "alpha=1", "bleu", 12.5}, {"alpha", "alpha=1", "beta", -0.25}, {"alpha", "alpha=2", "bleu", 0.1 + 0.2}};
  std::stringstream io;
  write_report(io, r);
  const Report back = read_report(io);
  REQUIRE(back.records.size() == 3);
  CHECK(back.records[2].value == 0.1 + 0.2);
  CHECK(back.value("alpha", "alpha=1", "beta") == -0.25);
  CHECK_THROWS_AS(back.value("alpha", "alpha=3", "bleu"), std::out_of_range);
  std::ostringstream table;
  write_report_table(table, r);
  CHECK(table.str() ==
        "experiment\tcondition\tbleu\tbeta\n"
        "alpha\talpha=1\t12.5\t-0.25\n"
        "alpha\talpha=2\t0.30000000000000004\tNA\n");
  std::istringstream bad("{\"experiment\": 1}\n");
  CHECK_THROWS(read_report(bad));
}
