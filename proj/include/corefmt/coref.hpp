#pragma once

// Coreference sub-model.
//
// Representation: either one decoder-style layer whose queries are the encoder
// states and whose cross-attention reads the decoder states (kFused), or one
// extra encoder layer over the encoder states (kEncoder).
//
// Scoring follows the start/end formulation: every token gets start and end
// projections; a span's mention score is
//   s_m(i, j) = w_s . a_i + w_e . b_j + a_i^T B b_j
// and the pairwise score between a candidate antecedent c and a mention s is
//   f(c, s) = s_m(c) + s_m(s) + sum over the four start/end biaffine terms,
// with the dummy antecedent fixed at 0. Candidates are kept in (start, end)
// order and a candidate can only be the antecedent of later candidates.

#include <cstdint>
#include <vector>

#include "corefmt/autograd.hpp"
#include "corefmt/corpus.hpp"
#include "corefmt/model.hpp"

namespace corefmt {

struct SpanCandidates {
  std::vector<Span> spans;            // sorted by (start, end)
  std::vector<double> mention_scores;  // aligned with spans
  std::size_t enumerated = 0;          // spans considered before filtering
};

struct AntecedentScoreMatrix {
  std::vector<Span> spans;
  // scores(s, c) for c < s; -inf elsewhere. The dummy antecedent scores 0.
  Matrix scores;

  // Probability of each antecedent of span s; the last entry is the dummy.
  std::vector<double> antecedent_distribution(std::size_t s) const;
};

// Links from candidate index to antecedent index; -1 is the dummy antecedent.
struct AntecedentMap {
  std::vector<Span> spans;
  std::vector<int> antecedent;
};

// Graph-level pieces used by training.
Var fuse_representations(Graph& g, const Model& model, Var h_enc, Var h_dec, std::mt19937_64* rng,
                         std::vector<Matrix>* self_probs = nullptr);
Var enc_only_representation(Graph& g, const Model& model, Var h_enc, std::mt19937_64* rng,
                            std::vector<Matrix>* self_probs = nullptr);
// Dispatches on model.config.coref_mode (h_dec is ignored for kEncoder).
Var coref_representation(Graph& g, const Model& model, Var h_enc, Var h_dec, std::mt19937_64* rng,
                         std::vector<Matrix>* self_probs = nullptr);

struct ScoredSpans {
  std::vector<Span> spans;
  Var mention_scores;  // K x 1
  Var pairwise;        // K x K
  std::size_t enumerated = 0;
};

ScoredSpans score_spans(Graph& g, const Model& model, Var h_coref, const std::vector<int>& src,
                        std::mt19937_64* rng);

// Gold-consistent antecedent columns per candidate (empty = dummy). Gold
// mentions that were filtered out are not supervised; clusters beyond
// `max_clusters` (0 = no cap) are dropped, smallest first.
std::vector<std::vector<int>> gold_antecedents(const std::vector<Span>& spans, const CorefClusterSet& gold,
                                               int max_clusters);
CorefClusterSet cap_clusters(const CorefClusterSet& gold, int max_clusters);

Var coref_loss(Graph& g, const ScoredSpans& scored, const CorefClusterSet& gold, int max_clusters);

// Spans of length <= max_len that do not cover the separator, sorted.
std::vector<Span> enumerate_spans(const std::vector<int>& src, int max_len);
std::size_t keep_count(std::size_t enumerated, double top_lambda);

// Value-level operations (dropout disabled).
Matrix fuse_representations(const Model& model, const Matrix& h_enc, const Matrix& h_dec);
Matrix enc_only_representation(const Model& model, const Matrix& h_enc);
SpanCandidates filter_spans(const Model& model, const Matrix& h_coref, const std::vector<int>& src);
AntecedentScoreMatrix antecedent_scores(const Model& model, const Matrix& h_coref, const SpanCandidates& cands);
double coref_loss(const AntecedentScoreMatrix& scores, const CorefClusterSet& gold, int max_clusters = 0);
AntecedentMap predict_antecedents(const AntecedentScoreMatrix& scores);
CorefClusterSet predict_clusters(const AntecedentScoreMatrix& scores);
// Connected components of the links; singletons dropped.
CorefClusterSet clusters_from_links(const AntecedentMap& links);

// log p(C | y, x): encode, teacher-force the decoder on y, build the coref
// representation, filter and score spans, and return -coref_loss.
double coref_log_prob(const Model& model, const std::vector<int>& src, const std::vector<int>& tgt,
                      const CorefClusterSet& gold);
// Full pipeline prediction over the source window given target y.
CorefClusterSet predict_clusters(const Model& model, const std::vector<int>& src, const std::vector<int>& tgt);

}  // namespace corefmt
