#include "corefmt/coref.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "corefmt/layers.hpp"
#include "corefmt/rng.hpp"

namespace corefmt {

namespace {

constexpr const char* kFusePrefix = "coref.fuse";
constexpr const char* kEncPrefix = "coref.enc";

// Score-producing weights start at zero so every antecedent begins equally
// likely; random pair scores otherwise let the dummy-antecedent rows push gold
// mentions out of the kept set before any link is learned.
void init_zero(ParameterSet& params, const std::string& name, int rows, int cols) {
  params.add(name, Matrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)));
}

double layer_dropout(const Model& model) {
  return model.config.dropout_coref_in_layer ? model.config.dropout_coref : 0.0;
}

Var projection(Graph& g, const Model& model, const std::string& prefix, Var h, std::mt19937_64* rng) {
  return dropout(g, relu(g, linear(g, model.params, prefix, h)), model.config.dropout_coref, rng);
}

Var weight(Graph& g, const Model& model, const std::string& name) { return g.parameter(model.params.at(name)); }

// n x n matrix of mention scores for span (i, j) at (i, j).
Var mention_matrix(Graph& g, const Model& model, Var h, std::mt19937_64* rng) {
  Var ms = projection(g, model, "coref.mention.start", h, rng);
  Var me = projection(g, model, "coref.mention.end", h, rng);
  Var start_score = linear(g, model.params, "coref.mention.start_score", ms);
  Var end_score = linear(g, model.params, "coref.mention.end_score", me);
  Var bilinear = matmul_nt(g, matmul(g, ms, weight(g, model, "coref.mention.bilinear")), me);
  return add(g, outer_sum(g, start_score, end_score), bilinear);
}

std::vector<std::pair<int, int>> as_pairs(const std::vector<Span>& spans) {
  std::vector<std::pair<int, int>> out;
  out.reserve(spans.size());
  for (const Span& s : spans) out.emplace_back(s.start, s.end);
  return out;
}

// K x K pairwise scores, row = mention, column = candidate antecedent.
Var pairwise_scores(Graph& g, const Model& model, Var h, Var mentions, const std::vector<Span>& kept,
                    std::mt19937_64* rng) {
  std::vector<int> starts, ends;
  for (const Span& s : kept) {
    starts.push_back(s.start);
    ends.push_back(s.end);
  }
  Var a = projection(g, model, "coref.antecedent.start", h, rng);
  Var b = projection(g, model, "coref.antecedent.end", h, rng);
  Var as = gather_rows(g, a, starts);
  Var ae = gather_rows(g, b, ends);
  auto biaffine = [&](Var left, const char* name, Var right) {
    return matmul_nt(g, matmul(g, left, weight(g, model, name)), right);
  };
  Var scores = biaffine(as, "coref.antecedent.ss", as);
  scores = add(g, scores, biaffine(ae, "coref.antecedent.ee", ae));
  scores = add(g, scores, biaffine(as, "coref.antecedent.se", ae));
  scores = add(g, scores, biaffine(ae, "coref.antecedent.es", as));
  Var mk = gather_elements(g, mentions, as_pairs(kept));
  return add(g, scores, outer_sum(g, mk, mk));
}

std::vector<Span> top_spans(const std::vector<Span>& spans, const Matrix& all_scores, std::size_t k) {
  std::vector<std::size_t> order(spans.size());
  std::iota(order.begin(), order.end(), 0);
  // spans are already sorted by (start, end), so index order is the tie-break.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return all_scores(a, 0) > all_scores(b, 0); });
  order.resize(k);
  std::sort(order.begin(), order.end());
  std::vector<Span> kept;
  kept.reserve(k);
  for (std::size_t i : order) kept.push_back(spans[i]);
  return kept;
}

}  // namespace

void init_coref_parameters(ParameterSet& params, const ModelConfig& config, CorefMode mode, std::uint64_t seed) {
  const int d = config.d_model;
  const int h = config.coref_hidden;
  if (mode == CorefMode::kFused && !params.contains(std::string(kFusePrefix) + ".ln1.gain")) {
    auto rng = make_stream(seed, "init.coref.fuse");
    init_decoder_layer(params, kFusePrefix, d, config.ffn_dim, rng);
  }
  if (mode == CorefMode::kEncoder && !params.contains(std::string(kEncPrefix) + ".ln1.gain")) {
    auto rng = make_stream(seed, "init.coref.enc");
    init_encoder_layer(params, kEncPrefix, d, config.ffn_dim, rng);
  }
  if (mode != CorefMode::kNone && !params.contains("coref.mention.bilinear")) {
    auto rng = make_stream(seed, "init.coref.scorer");
    init_linear(params, "coref.mention.start", h, d, rng);
    init_linear(params, "coref.mention.end", h, d, rng);
    for (const char* name : {"coref.mention.start_score", "coref.mention.end_score"}) {
      init_zero(params, std::string(name) + ".weight", 1, h);
      init_zero(params, std::string(name) + ".bias", 1, 1);
    }
    init_zero(params, "coref.mention.bilinear", h, h);
    init_linear(params, "coref.antecedent.start", h, d, rng);
    init_linear(params, "coref.antecedent.end", h, d, rng);
    for (const char* name : {"coref.antecedent.ss", "coref.antecedent.ee", "coref.antecedent.se", "coref.antecedent.es"}) {
      init_zero(params, name, h, h);
    }
  }
}

std::vector<double> AntecedentScoreMatrix::antecedent_distribution(std::size_t s) const {
  std::vector<double> p(s + 1);
  double mx = 0.0;
  for (std::size_t c = 0; c < s; ++c) mx = std::max(mx, scores(s, c));
  double z = std::exp(-mx);
  for (std::size_t c = 0; c < s; ++c) z += std::exp(scores(s, c) - mx);
  for (std::size_t c = 0; c < s; ++c) p[c] = std::exp(scores(s, c) - mx) / z;
  p[s] = std::exp(-mx) / z;
  return p;
}

Var fuse_representations(Graph& g, const Model& model, Var h_enc, Var h_dec, std::mt19937_64* rng,
                         std::vector<Matrix>* self_probs) {
  return decoder_layer(g, model.params, kFusePrefix, h_enc, h_dec, model.config.heads, /*causal=*/false,
                       layer_dropout(model), rng, self_probs);
}

Var enc_only_representation(Graph& g, const Model& model, Var h_enc, std::mt19937_64* rng,
                            std::vector<Matrix>* self_probs) {
  return encoder_layer(g, model.params, kEncPrefix, h_enc, model.config.heads, layer_dropout(model), rng, self_probs);
}

Var coref_representation(Graph& g, const Model& model, Var h_enc, Var h_dec, std::mt19937_64* rng,
                         std::vector<Matrix>* self_probs) {
  switch (model.config.coref_mode) {
    case CorefMode::kFused: return fuse_representations(g, model, h_enc, h_dec, rng, self_probs);
    case CorefMode::kEncoder: return enc_only_representation(g, model, h_enc, rng, self_probs);
    case CorefMode::kNone: break;
  }
  throw std::logic_error("model has no coreference head");
}

std::vector<Span> enumerate_spans(const std::vector<int>& src, int max_len) {
  std::vector<Span> spans;
  const int n = static_cast<int>(src.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n && j - i + 1 <= max_len; ++j) {
      if (src[j] == Vocab::kSep) break;
      spans.push_back(Span{i, j});
    }
  }
  return spans;
}

std::size_t keep_count(std::size_t enumerated, double top_lambda) {
  if (enumerated == 0) return 0;
  const double raw = std::ceil(top_lambda * static_cast<double>(enumerated) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, enumerated);
}

ScoredSpans score_spans(Graph& g, const Model& model, Var h_coref, const std::vector<int>& src,
                        std::mt19937_64* rng) {
  const auto spans = enumerate_spans(src, model.config.max_span_len);
  Var mentions = mention_matrix(g, model, h_coref, rng);
  Var all_scores = gather_elements(g, mentions, as_pairs(spans));
  ScoredSpans out;
  out.enumerated = spans.size();
  out.spans = top_spans(spans, g.value(all_scores), keep_count(spans.size(), model.config.top_lambda));
  out.mention_scores = gather_elements(g, mentions, as_pairs(out.spans));
  out.pairwise = pairwise_scores(g, model, h_coref, mentions, out.spans, rng);
  return out;
}

CorefClusterSet cap_clusters(const CorefClusterSet& gold, int max_clusters) {
  if (max_clusters <= 0 || gold.clusters.size() <= static_cast<std::size_t>(max_clusters)) return gold;
  std::vector<std::size_t> order(gold.clusters.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return gold.clusters[a].size() > gold.clusters[b].size();
  });
  order.resize(static_cast<std::size_t>(max_clusters));
  std::sort(order.begin(), order.end());
  CorefClusterSet out;
  for (std::size_t i : order) out.clusters.push_back(gold.clusters[i]);
  return out;
}

std::vector<std::vector<int>> gold_antecedents(const std::vector<Span>& spans, const CorefClusterSet& gold,
                                               int max_clusters) {
  const CorefClusterSet capped = cap_clusters(gold, max_clusters);
  std::map<Span, int> cluster_of;
  for (std::size_t k = 0; k < capped.clusters.size(); ++k) {
    for (const Span& s : capped.clusters[k]) cluster_of.emplace(s, static_cast<int>(k));
  }
  std::vector<int> cid(spans.size(), -1);
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (auto it = cluster_of.find(spans[i]); it != cluster_of.end()) cid[i] = it->second;
  }
  std::vector<std::vector<int>> out(spans.size());
  for (std::size_t s = 0; s < spans.size(); ++s) {
    if (cid[s] < 0) continue;
    for (std::size_t c = 0; c < s; ++c) {
      if (cid[c] == cid[s]) out[s].push_back(static_cast<int>(c));
    }
  }
  return out;
}

Var coref_loss(Graph& g, const ScoredSpans& scored, const CorefClusterSet& gold, int max_clusters) {
  return antecedent_nll(g, scored.pairwise, gold_antecedents(scored.spans, gold, max_clusters));
}

Matrix fuse_representations(const Model& model, const Matrix& h_enc, const Matrix& h_dec) {
  Graph g(false);
  return g.value(fuse_representations(g, model, g.constant(h_enc), g.constant(h_dec), nullptr));
}

Matrix enc_only_representation(const Model& model, const Matrix& h_enc) {
  Graph g(false);
  return g.value(enc_only_representation(g, model, g.constant(h_enc), nullptr));
}

SpanCandidates filter_spans(const Model& model, const Matrix& h_coref, const std::vector<int>& src) {
  if (h_coref.rows() != src.size()) throw std::invalid_argument("filter_spans: representation/source length mismatch");
  Graph g(false);
  const auto spans = enumerate_spans(src, model.config.max_span_len);
  Var mentions = mention_matrix(g, model, g.constant(h_coref), nullptr);
  const Matrix& all = g.value(gather_elements(g, mentions, as_pairs(spans)));
  SpanCandidates out;
  out.enumerated = spans.size();
  out.spans = top_spans(spans, all, keep_count(spans.size(), model.config.top_lambda));
  const Matrix& m = g.value(mentions);
  for (const Span& s : out.spans) out.mention_scores.push_back(m(s.start, s.end));
  return out;
}

AntecedentScoreMatrix antecedent_scores(const Model& model, const Matrix& h_coref, const SpanCandidates& cands) {
  if (cands.spans.empty()) throw std::invalid_argument("antecedent_scores: no candidate spans");
  Graph g(false);
  Var h = g.constant(h_coref);
  Var mentions = mention_matrix(g, model, h, nullptr);
  AntecedentScoreMatrix out;
  out.spans = cands.spans;
  out.scores = g.value(pairwise_scores(g, model, h, mentions, cands.spans, nullptr));
  const double neg_inf = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < out.scores.rows(); ++s) {
    for (std::size_t c = s; c < out.scores.cols(); ++c) out.scores(s, c) = neg_inf;
  }
  return out;
}

double coref_loss(const AntecedentScoreMatrix& scores, const CorefClusterSet& gold, int max_clusters) {
  Graph g(false);
  Matrix masked = scores.scores;
  // antecedent_nll never reads c >= s; zero them so the constant stays finite.
  for (std::size_t s = 0; s < masked.rows(); ++s) {
    for (std::size_t c = s; c < masked.cols(); ++c) masked(s, c) = 0.0;
  }
  return scalar(g, antecedent_nll(g, g.constant(std::move(masked)), gold_antecedents(scores.spans, gold, max_clusters)));
}

AntecedentMap predict_antecedents(const AntecedentScoreMatrix& scores) {
  AntecedentMap out;
  out.spans = scores.spans;
  out.antecedent.assign(scores.spans.size(), -1);
  for (std::size_t s = 0; s < scores.spans.size(); ++s) {
    double best = 0.0;
    for (std::size_t c = 0; c < s; ++c) {
      if (scores.scores(s, c) > best) {
        best = scores.scores(s, c);
        out.antecedent[s] = static_cast<int>(c);
      }
    }
  }
  return out;
}

CorefClusterSet clusters_from_links(const AntecedentMap& links) {
  const std::size_t n = links.spans.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t s = 0; s < n; ++s) {
    const int a = links.antecedent[s];
    if (a < 0) continue;
    if (static_cast<std::size_t>(a) >= s) throw std::invalid_argument("antecedent must precede its mention");
    parent[find(s)] = find(static_cast<std::size_t>(a));
  }
  std::map<std::size_t, Cluster> groups;
  for (std::size_t s = 0; s < n; ++s) groups[find(s)].push_back(links.spans[s]);
  CorefClusterSet out;
  for (auto& [root, c] : groups) {
    if (c.size() >= 2) out.clusters.push_back(std::move(c));
  }
  out.normalize();
  return out;
}

CorefClusterSet predict_clusters(const AntecedentScoreMatrix& scores) {
  return clusters_from_links(predict_antecedents(scores));
}

namespace {

struct CorefPass {
  Graph graph{false};
  ScoredSpans scored;
};

void run_coref(CorefPass& pass, const Model& model, const std::vector<int>& src, const std::vector<int>& tgt,
               const CorefClusterSet* clusters) {
  Graph& g = pass.graph;
  Var enc = encode(g, model, src, clusters, nullptr);
  Var dec;
  if (model.config.coref_mode == CorefMode::kFused) dec = decode(g, model, decoder_input(tgt), enc, nullptr);
  Var h = coref_representation(g, model, enc, dec, nullptr);
  pass.scored = score_spans(g, model, h, src, nullptr);
}

}  // namespace

double coref_log_prob(const Model& model, const std::vector<int>& src, const std::vector<int>& tgt,
                      const CorefClusterSet& gold) {
  CorefPass pass;
  run_coref(pass, model, src, tgt, &gold);
  return -scalar(pass.graph, coref_loss(pass.graph, pass.scored, gold, model.config.max_clusters));
}

CorefClusterSet predict_clusters(const Model& model, const std::vector<int>& src, const std::vector<int>& tgt) {
  CorefPass pass;
  run_coref(pass, model, src, tgt, nullptr);
  AntecedentScoreMatrix scores;
  scores.spans = pass.scored.spans;
  scores.scores = pass.graph.value(pass.scored.pairwise);
  return predict_clusters(scores);
}

}  // namespace corefmt
