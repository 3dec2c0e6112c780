#pragma once

// Metrics and analysis tools. BLEU works on already-tokenized sequences and
// does no retokenization of its own.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "corefmt/corpus.hpp"
#include "corefmt/model.hpp"

namespace corefmt {

// Clipped n-gram matches and hypothesis n-gram totals for n = 1..4.
struct BleuStats {
  std::array<double, 4> matches{};
  std::array<double, 4> totals{};
  double hyp_length = 0.0;
  double ref_length = 0.0;

  BleuStats& operator+=(const BleuStats& o);
};

BleuStats bleu_stats(const Tokens& hypothesis, const Tokens& reference);
// Unsmoothed BLEU-4 in [0, 100]; zero as soon as one precision is zero.
double bleu_from_stats(const BleuStats& stats);
double corpus_bleu(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references);
// Add-one smoothing on the 2..4-gram precisions, for single sentences.
double sentence_bleu(const Tokens& hypothesis, const Tokens& reference);

struct MucResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Throws std::invalid_argument("degenerate gold") when gold has no links.
MucResult muc_score(const CorefClusterSet& predicted, const CorefClusterSet& gold);

struct ContrastiveItem {
  std::string category;
  Tokens source;
  std::vector<Tokens> candidates;
  std::size_t correct = 0;
};

struct ContrastiveReport {
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // category -> (correct, total)
  double accuracy(const std::string& category) const;
  double overall() const;
};

// Scores every candidate by teacher-forced translation log-probability. An
// item counts as correct only when the gold candidate is strictly best.
ContrastiveReport contrastive_accuracy(const std::vector<ContrastiveItem>& items, const Model& model);

// Blocks separated by blank lines:
//   category <name>
//   source <tokens>
//   candidate <tokens>     (two or more)
//   gold <0-based index>
std::vector<ContrastiveItem> read_contrastive_set(const std::filesystem::path& path);
void write_contrastive_set(const std::filesystem::path& path, const std::vector<ContrastiveItem>& items);

enum class HeatmapSource { kEncoder, kCoref };

// Mean over heads of the self-attention weights of the last encoder layer, or
// of the coreference layer (which needs the target for the fused variant).
Matrix attention_heatmap(const Model& model, const std::vector<int>& src, HeatmapSource source = HeatmapSource::kEncoder,
                         const std::vector<int>& tgt = {});

// "# heatmap size=N layer=L model=TAG" followed by N rows of N numbers.
void write_heatmap(std::ostream& out, const Matrix& heatmap, const std::string& layer, const std::string& model_tag);
Matrix read_heatmap(std::istream& in);

// Removes round(fraction * members) randomly chosen mentions while every
// cluster keeps at least two; stops early once no cluster can shrink.
CorefClusterSet prune_clusters(const CorefClusterSet& clusters, double fraction, std::uint64_t seed);

struct TokenAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double ratio() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

// Teacher-forced argmax accuracy over y + <eos>.
TokenAccuracy token_accuracy(const Model& model, const std::vector<Example>& data);

}  // namespace corefmt
