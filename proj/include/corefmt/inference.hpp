#pragma once

// Beam search, N-best lists and reranking by
//   joint = log p(y | x) + beta * log p(C | y, x).

#include <filesystem>
#include <string>
#include <vector>

#include "corefmt/corpus.hpp"
#include "corefmt/model.hpp"

namespace corefmt {

struct Hypothesis {
  std::vector<int> ids;  // without <bos>/<eos>
  double lp_mt = 0.0;
  double lp_coref = 0.0;
  double joint = 0.0;
  bool finished = false;  // ended with <eos> rather than the length limit
};

struct NBestList {
  std::string window_id;
  std::vector<int> source;
  std::vector<Hypothesis> hyps;
  int beam_size = 0;
  std::string key = "mt";  // "mt" or "joint"
};

struct BeamOptions {
  int beam = 5;
  bool length_normalize = false;
  int max_length = 0;  // 0: min(max_len - 1, 2 |x| + 10)
};

// Hypotheses are ranked by summed token log-probability (optionally divided
// by length). Equal scores are broken by parent rank, then token id.
NBestList beam_search(const Model& model, const std::vector<int>& src, const BeamOptions& opts,
                      const CorefClusterSet* clusters = nullptr);

// Teacher-forced log p(y | x), with the <eos> term only when `finished`.
double score_sequence(const Model& model, const std::vector<int>& src, const std::vector<int>& ids, bool finished,
                      const CorefClusterSet* clusters = nullptr);

// Fills lp_coref for every hypothesis (0 when the model has no coreference head).
void attach_coref_scores(NBestList& nbest, const CorefClusterSet& clusters, const Model& model);

// Reorders by joint score using cached lp_mt/lp_coref; stable on ties.
NBestList rerank_cached(const NBestList& nbest, double beta);
// attach_coref_scores followed by rerank_cached.
NBestList rerank(const NBestList& nbest, const CorefClusterSet& clusters, const Model& model, double beta);

// Output words of a hypothesis: last sentence, subword pieces joined.
Tokens output_tokens(const Vocab& vocab, const std::vector<int>& ids);

// The tuning grid: -2, -1.9999, ..., 2.
std::vector<double> beta_grid();

struct BetaChoice {
  double beta = 0.0;
  double bleu = 0.0;
};

// Grid search over beta_grid() maximizing corpus BLEU of the top reranked
// outputs against `references`. Uses cached scores only. Ties go to the
// smallest |beta|, then to the non-negative one.
BetaChoice tune_beta(const std::vector<NBestList>& lists, const std::vector<Tokens>& references, const Vocab& vocab);

// Highest sentence-BLEU hypothesis; ties go to the higher lp_mt.
Hypothesis oracle_select(const NBestList& nbest, const Tokens& reference, const Vocab& vocab);

// Tab-separated: window id, rank, lp_mt, lp_coref, tokens. Finished
// hypotheses end with the literal <eos> token.
void write_nbest(const std::filesystem::path& path, const std::vector<NBestList>& lists, const Vocab& vocab);
std::vector<NBestList> read_nbest(const std::filesystem::path& path, const Vocab& vocab);

}  // namespace corefmt
