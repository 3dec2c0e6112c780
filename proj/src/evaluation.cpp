#include "corefmt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "corefmt/coref.hpp"
#include "corefmt/io.hpp"
#include "corefmt/rng.hpp"

namespace corefmt {

BleuStats& BleuStats::operator+=(const BleuStats& o) {
  for (int n = 0; n < 4; ++n) {
    matches[n] += o.matches[n];
    totals[n] += o.totals[n];
  }
  hyp_length += o.hyp_length;
  ref_length += o.ref_length;
  return *this;
}

namespace {

std::map<std::vector<std::string>, int> ngram_counts(const Tokens& t, std::size_t n) {
  std::map<std::vector<std::string>, int> counts;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++counts[Tokens(t.begin() + i, t.begin() + i + n)];
  return counts;
}

double brevity_penalty(double hyp, double ref) { return hyp < ref ? std::exp(1.0 - ref / hyp) : 1.0; }

}  // namespace

BleuStats bleu_stats(const Tokens& hypothesis, const Tokens& reference) {
  BleuStats s;
  s.hyp_length = static_cast<double>(hypothesis.size());
  s.ref_length = static_cast<double>(reference.size());
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto h = ngram_counts(hypothesis, n);
    const auto r = ngram_counts(reference, n);
    double m = 0.0;
    for (const auto& [gram, c] : h) {
      if (auto it = r.find(gram); it != r.end()) m += std::min(c, it->second);
    }
    s.matches[n - 1] = m;
    s.totals[n - 1] = hypothesis.size() >= n ? static_cast<double>(hypothesis.size() - n + 1) : 0.0;
  }
  return s;
}

double bleu_from_stats(const BleuStats& s) {
  if (s.hyp_length == 0.0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    if (s.matches[n] == 0.0) return 0.0;
    log_sum += std::log(s.matches[n] / s.totals[n]);
  }
  return 100.0 * brevity_penalty(s.hyp_length, s.ref_length) * std::exp(log_sum / 4.0);
}

double corpus_bleu(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references) {
  if (hypotheses.size() != references.size()) throw std::invalid_argument("corpus_bleu: length mismatch");
  if (hypotheses.empty()) throw std::invalid_argument("corpus_bleu: empty corpus");
  BleuStats total;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) total += bleu_stats(hypotheses[i], references[i]);
  return bleu_from_stats(total);
}

double sentence_bleu(const Tokens& hypothesis, const Tokens& reference) {
  const BleuStats s = bleu_stats(hypothesis, reference);
  if (s.hyp_length == 0.0 || s.matches[0] == 0.0) return 0.0;
  double log_sum = std::log(s.matches[0] / s.totals[0]);
  for (int n = 1; n < 4; ++n) log_sum += std::log((s.matches[n] + 1.0) / (s.totals[n] + 1.0));
  return 100.0 * brevity_penalty(s.hyp_length, s.ref_length) * std::exp(log_sum / 4.0);
}

namespace {

// Sum over key clusters of (|K| - number of response partitions of K), and
// the sum of (|K| - 1).
std::pair<double, double> muc_links(const CorefClusterSet& key, const CorefClusterSet& response) {
  std::map<Span, std::size_t> owner;
  for (std::size_t i = 0; i < response.clusters.size(); ++i) {
    for (const Span& s : response.clusters[i]) owner[s] = i;
  }
  double num = 0.0, den = 0.0;
  for (const Cluster& k : key.clusters) {
    if (k.empty()) continue;
    std::size_t partitions = 0;
    std::vector<std::size_t> seen;
    for (const Span& s : k) {
      auto it = owner.find(s);
      if (it == owner.end()) {
        ++partitions;  // unresolved mention is its own partition
      } else if (std::find(seen.begin(), seen.end(), it->second) == seen.end()) {
        seen.push_back(it->second);
        ++partitions;
      }
    }
    num += static_cast<double>(k.size() - partitions);
    den += static_cast<double>(k.size() - 1);
  }
  return {num, den};
}

}  // namespace

MucResult muc_score(const CorefClusterSet& predicted, const CorefClusterSet& gold) {
  const auto [rn, rd] = muc_links(gold, predicted);
  if (rd == 0.0) throw std::invalid_argument("degenerate gold");
  const auto [pn, pd] = muc_links(predicted, gold);
  MucResult r;
  r.recall = rn / rd;
  r.precision = pd == 0.0 ? 0.0 : pn / pd;
  r.f1 = (r.precision + r.recall) == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

double ContrastiveReport::accuracy(const std::string& category) const {
  auto it = counts.find(category);
  if (it == counts.end() || it->second.second == 0) return 0.0;
  return static_cast<double>(it->second.first) / static_cast<double>(it->second.second);
}

double ContrastiveReport::overall() const {
  std::size_t c = 0, t = 0;
  for (const auto& [cat, ct] : counts) {
    c += ct.first;
    t += ct.second;
  }
  return t ? static_cast<double>(c) / static_cast<double>(t) : 0.0;
}

namespace {

double teacher_forced_log_prob(const Model& model, const Matrix& h_enc, const std::vector<int>& tgt) {
  const Matrix lp = token_log_probs(model, decode(model, decoder_input(tgt), h_enc));
  const auto out = decoder_output(tgt);
  double sum = 0.0;
  for (std::size_t t = 0; t < out.size(); ++t) sum += lp(t, static_cast<std::size_t>(out[t]));
  return sum;
}

}  // namespace

ContrastiveReport contrastive_accuracy(const std::vector<ContrastiveItem>& items, const Model& model) {
  ContrastiveReport report;
  for (const auto& item : items) {
    if (item.candidates.size() < 2) throw std::invalid_argument("contrastive item needs at least two candidates");
    if (item.correct >= item.candidates.size()) throw std::invalid_argument("contrastive gold index out of range");
    const Matrix h_enc = encode(model, model.vocab.encode(item.source));
    std::vector<double> scores;
    for (const auto& c : item.candidates) scores.push_back(teacher_forced_log_prob(model, h_enc, model.vocab.encode(c)));
    bool strictly_best = true;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (i != item.correct && scores[i] >= scores[item.correct]) strictly_best = false;
    }
    auto& [correct, total] = report.counts[item.category];
    correct += strictly_best ? 1 : 0;
    ++total;
  }
  return report;
}

std::vector<ContrastiveItem> read_contrastive_set(const std::filesystem::path& path) {
  std::vector<ContrastiveItem> items;
  ContrastiveItem cur;
  bool open = false, has_gold = false;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) {
    return CorpusError("contrastive set " + path.string() + " line " + std::to_string(line_no) + ": " + why);
  };
  auto close = [&] {
    if (!open) return;
    if (!has_gold) throw fail("item without gold index");
    if (cur.candidates.size() < 2) throw fail("item needs at least two candidates");
    if (cur.correct >= cur.candidates.size()) throw fail("gold index out of range");
    items.push_back(std::move(cur));
    cur = {};
    open = has_gold = false;
  };
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      close();
      continue;
    }
    const auto sp = line.find(' ');
    const std::string key = line.substr(0, sp);
    const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
    open = true;
    if (key == "category") {
      cur.category = rest;
    } else if (key == "source") {
      cur.source = split_whitespace(rest);
    } else if (key == "candidate") {
      cur.candidates.push_back(split_whitespace(rest));
    } else if (key == "gold") {
      try {
        cur.correct = std::stoul(rest);
      } catch (const std::exception&) {
        throw fail("bad gold index");
      }
      has_gold = true;
    } else {
      throw fail("unknown key " + key);
    }
  }
  close();
  return items;
}

void write_contrastive_set(const std::filesystem::path& path, const std::vector<ContrastiveItem>& items) {
  std::vector<std::string> lines;
  for (const auto& item : items) {
    if (!lines.empty()) lines.emplace_back();
    lines.push_back("category " + item.category);
    lines.push_back("source " + join_tokens(item.source));
    for (const auto& c : item.candidates) lines.push_back("candidate " + join_tokens(c));
    lines.push_back("gold " + std::to_string(item.correct));
  }
  write_lines(path, lines);
}

namespace {

Matrix mean_heads(const std::vector<Matrix>& heads) {
  if (heads.empty()) throw std::logic_error("no attention heads recorded");
  Matrix out(heads.front().rows(), heads.front().cols());
  for (const auto& h : heads) {
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += h.data()[i];
  }
  const double n = static_cast<double>(heads.size());
  for (double& x : out.values()) x /= n;
  return out;
}

}  // namespace

Matrix attention_heatmap(const Model& model, const std::vector<int>& src, HeatmapSource source,
                         const std::vector<int>& tgt) {
  Graph g(false);
  AttentionTrace trace;
  Var enc = encode(g, model, src, nullptr, nullptr, &trace);
  if (source == HeatmapSource::kEncoder) {
    if (trace.encoder_self.empty()) throw std::invalid_argument("model has no encoder layers");
    return mean_heads(trace.encoder_self.back());
  }
  Var dec;
  if (model.config.coref_mode == CorefMode::kFused) dec = decode(g, model, decoder_input(tgt), enc, nullptr);
  coref_representation(g, model, enc, dec, nullptr, &trace.coref_self);
  return mean_heads(trace.coref_self);
}

void write_heatmap(std::ostream& out, const Matrix& heatmap, const std::string& layer, const std::string& model_tag) {
  if (heatmap.rows() != heatmap.cols()) throw std::invalid_argument("heatmap must be square");
  out << "# heatmap size=" << heatmap.rows() << " layer=" << layer << " model=" << model_tag << '\n';
  for (std::size_t r = 0; r < heatmap.rows(); ++r) {
    for (std::size_t c = 0; c < heatmap.cols(); ++c) out << (c ? " " : "") << format_double(heatmap(r, c));
    out << '\n';
  }
}

Matrix read_heatmap(std::istream& in) {
  std::string header;
  std::getline(in, header);
  const auto pos = header.find("size=");
  if (header.rfind("# heatmap", 0) != 0 || pos == std::string::npos) throw std::runtime_error("not a heatmap file");
  const std::size_t n = std::stoul(header.substr(pos + 5));
  Matrix m(n, n);
  for (double& x : m.values()) {
    std::string w;
    if (!(in >> w)) throw std::runtime_error("truncated heatmap");
    x = parse_double(w);
  }
  return m;
}

CorefClusterSet prune_clusters(const CorefClusterSet& clusters, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("prune fraction must be in [0, 1]");
  CorefClusterSet out = clusters;
  const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(clusters.mention_count())));
  auto rng = make_stream(seed, "prune");
  for (std::size_t removed = 0; removed < target; ++removed) {
    std::vector<std::pair<std::size_t, std::size_t>> removable;
    for (std::size_t c = 0; c < out.clusters.size(); ++c) {
      if (out.clusters[c].size() <= 2) continue;
      for (std::size_t m = 0; m < out.clusters[c].size(); ++m) removable.emplace_back(c, m);
    }
    if (removable.empty()) break;
    const auto [c, m] = removable[uniform_index(rng, removable.size())];
    out.clusters[c].erase(out.clusters[c].begin() + static_cast<std::ptrdiff_t>(m));
  }
  return out;
}

TokenAccuracy token_accuracy(const Model& model, const std::vector<Example>& data) {
  TokenAccuracy acc;
  for (const auto& ex : data) {
    const Matrix lp = token_log_probs(model, decode(model, decoder_input(ex.tgt), encode(model, ex.src, &ex.clusters)));
    const auto out = decoder_output(ex.tgt);
    for (std::size_t t = 0; t < out.size(); ++t) {
      auto row = lp.row(t);
      const auto best = std::max_element(row.begin(), row.end()) - row.begin();
      acc.correct += best == out[t] ? 1 : 0;
      ++acc.total;
    }
  }
  return acc;
}

}  // namespace corefmt
