#include "corefmt/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "corefmt/coref.hpp"
#include "corefmt/evaluation.hpp"
#include "corefmt/io.hpp"
#include "corefmt/subword.hpp"

namespace corefmt {

namespace {

struct Candidate {
  double rank_score;
  double lp;
  std::size_t parent;
  int token;
};

double rank_score(double lp, std::size_t length, bool normalize) {
  return normalize ? lp / static_cast<double>(std::max<std::size_t>(length, 1)) : lp;
}

}  // namespace

NBestList beam_search(const Model& model, const std::vector<int>& src, const BeamOptions& opts,
                      const CorefClusterSet* clusters) {
  if (opts.beam < 1) throw std::invalid_argument("beam must be >= 1");
  const auto beam = static_cast<std::size_t>(opts.beam);
  const int limit = opts.max_length > 0 ? opts.max_length
                                        : std::min(model.config.max_len - 1, 2 * static_cast<int>(src.size()) + 10);
  const Matrix h_enc = encode(model, src, clusters);

  NBestList out;
  out.source = src;
  out.beam_size = opts.beam;
  std::vector<Hypothesis> alive{Hypothesis{}};
  std::vector<Hypothesis> done;

  for (int t = 0; t < limit && !alive.empty(); ++t) {
    std::vector<Candidate> cands;
    for (std::size_t r = 0; r < alive.size(); ++r) {
      const Matrix lp = token_log_probs(model, decode(model, decoder_input(alive[r].ids), h_enc));
      auto last = lp.row(lp.rows() - 1);
      for (int v = 0; v < model.vocab.size(); ++v) {
        if (v == Vocab::kBos) continue;
        const double total = alive[r].lp_mt + last[v];
        const std::size_t len = alive[r].ids.size() + 1;
        cands.push_back({rank_score(total, len, opts.length_normalize), total, r, v});
      }
    }
    const std::size_t keep = std::min(beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.rank_score != b.rank_score) return a.rank_score > b.rank_score;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      Hypothesis h;
      h.ids = alive[cands[i].parent].ids;
      h.lp_mt = cands[i].lp;
      if (cands[i].token == Vocab::kEos) {
        h.finished = true;
        done.push_back(std::move(h));
      } else {
        h.ids.push_back(cands[i].token);
        next.push_back(std::move(h));
      }
    }
    alive = std::move(next);
    // Without length normalization scores only fall, so a full set of
    // finished hypotheses that beats every live one is final.
    if (!opts.length_normalize && done.size() >= beam && !alive.empty()) {
      std::vector<double> fin;
      for (const auto& h : done) fin.push_back(h.lp_mt);
      std::nth_element(fin.begin(), fin.begin() + static_cast<std::ptrdiff_t>(beam - 1), fin.end(), std::greater<>());
      double best_alive = -std::numeric_limits<double>::infinity();
      for (const auto& h : alive) best_alive = std::max(best_alive, h.lp_mt);
      if (best_alive < fin[beam - 1]) break;
    }
    if (opts.length_normalize && done.size() >= beam) break;
  }
  for (auto& h : alive) done.push_back(std::move(h));
  std::stable_sort(done.begin(), done.end(), [&](const Hypothesis& a, const Hypothesis& b) {
    const std::size_t la = a.ids.size() + (a.finished ? 1 : 0);
    const std::size_t lb = b.ids.size() + (b.finished ? 1 : 0);
    return rank_score(a.lp_mt, la, opts.length_normalize) > rank_score(b.lp_mt, lb, opts.length_normalize);
  });
  if (done.size() > beam) done.resize(beam);
  for (auto& h : done) h.joint = h.lp_mt;
  out.hyps = std::move(done);
  return out;
}

double score_sequence(const Model& model, const std::vector<int>& src, const std::vector<int>& ids, bool finished,
                      const CorefClusterSet* clusters) {
  const Matrix lp = token_log_probs(model, decode(model, decoder_input(ids), encode(model, src, clusters)));
  double sum = 0.0;
  for (std::size_t t = 0; t < ids.size(); ++t) sum += lp(t, static_cast<std::size_t>(ids[t]));
  if (finished) sum += lp(ids.size(), Vocab::kEos);
  return sum;
}

void attach_coref_scores(NBestList& nbest, const CorefClusterSet& clusters, const Model& model) {
  for (auto& h : nbest.hyps) {
    h.lp_coref = model.config.coref_mode == CorefMode::kNone ? 0.0 : coref_log_prob(model, nbest.source, h.ids, clusters);
  }
}

NBestList rerank_cached(const NBestList& nbest, double beta) {
  NBestList out = nbest;
  for (auto& h : out.hyps) h.joint = h.lp_mt + beta * h.lp_coref;
  std::stable_sort(out.hyps.begin(), out.hyps.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.joint > b.joint; });
  out.key = "joint";
  return out;
}

NBestList rerank(const NBestList& nbest, const CorefClusterSet& clusters, const Model& model, double beta) {
  NBestList scored = nbest;
  attach_coref_scores(scored, clusters, model);
  return rerank_cached(scored, beta);
}

Tokens output_tokens(const Vocab& vocab, const std::vector<int>& ids) {
  return detokenize(last_sentence(vocab.decode(ids)));
}

std::vector<double> beta_grid() {
  std::vector<double> grid;
  grid.reserve(40001);
  for (int k = -20000; k <= 20000; ++k) grid.push_back(static_cast<double>(k) / 10000.0);
  return grid;
}

BetaChoice tune_beta(const std::vector<NBestList>& lists, const std::vector<Tokens>& references, const Vocab& vocab) {
  if (lists.empty()) throw std::invalid_argument("tune_beta: empty validation set");
  if (lists.size() != references.size()) throw std::invalid_argument("tune_beta: references do not match N-best lists");
  std::vector<std::vector<BleuStats>> stats(lists.size());
  for (std::size_t i = 0; i < lists.size(); ++i) {
    if (lists[i].hyps.empty()) throw std::invalid_argument("tune_beta: empty N-best list");
    for (const auto& h : lists[i].hyps) stats[i].push_back(bleu_stats(output_tokens(vocab, h.ids), references[i]));
  }

  BetaChoice best{0.0, -1.0};
  std::vector<std::size_t> prev_choice;
  double prev_bleu = 0.0;
  for (double beta : beta_grid()) {
    std::vector<std::size_t> choice(lists.size());
    for (std::size_t i = 0; i < lists.size(); ++i) {
      const auto& hyps = lists[i].hyps;
      std::size_t arg = 0;
      double top = hyps[0].lp_mt + beta * hyps[0].lp_coref;
      for (std::size_t j = 1; j < hyps.size(); ++j) {
        const double s = hyps[j].lp_mt + beta * hyps[j].lp_coref;
        if (s > top) {
          top = s;
          arg = j;
        }
      }
      choice[i] = arg;
    }
    double bleu = prev_bleu;
    if (choice != prev_choice) {
      BleuStats total;
      for (std::size_t i = 0; i < lists.size(); ++i) total += stats[i][choice[i]];
      bleu = bleu_from_stats(total);
      prev_choice = std::move(choice);
      prev_bleu = bleu;
    }
    const bool better = bleu > best.bleu ||
                        (bleu == best.bleu && (std::abs(beta) < std::abs(best.beta) ||
                                               (std::abs(beta) == std::abs(best.beta) && beta > best.beta)));
    if (better) best = {beta, bleu};
  }
  return best;
}

Hypothesis oracle_select(const NBestList& nbest, const Tokens& reference, const Vocab& vocab) {
  if (nbest.hyps.empty()) throw std::invalid_argument("oracle_select: empty N-best list");
  std::size_t arg = 0;
  double best = sentence_bleu(output_tokens(vocab, nbest.hyps[0].ids), reference);
  for (std::size_t j = 1; j < nbest.hyps.size(); ++j) {
    const double s = sentence_bleu(output_tokens(vocab, nbest.hyps[j].ids), reference);
    if (s > best || (s == best && nbest.hyps[j].lp_mt > nbest.hyps[arg].lp_mt)) {
      best = s;
      arg = j;
    }
  }
  return nbest.hyps[arg];
}

void write_nbest(const std::filesystem::path& path, const std::vector<NBestList>& lists, const Vocab& vocab) {
  std::vector<std::string> lines;
  for (const auto& list : lists) {
    for (std::size_t r = 0; r < list.hyps.size(); ++r) {
      const auto& h = list.hyps[r];
      Tokens toks = vocab.decode(h.ids);
      if (h.finished) toks.push_back(vocab.token(Vocab::kEos));
      lines.push_back(list.window_id + '\t' + std::to_string(r) + '\t' + format_double(h.lp_mt) + '\t' +
                      format_double(h.lp_coref) + '\t' + join_tokens(toks));
    }
  }
  write_lines(path, lines);
}

std::vector<NBestList> read_nbest(const std::filesystem::path& path, const Vocab& vocab) {
  std::vector<NBestList> lists;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t pos = 0;
    for (int i = 0; i < 4; ++i) {
      const auto tab = line.find('\t', pos);
      if (tab == std::string::npos) throw CorpusError("malformed N-best record at line " + std::to_string(line_no));
      f.push_back(line.substr(pos, tab - pos));
      pos = tab + 1;
    }
    f.push_back(line.substr(pos));
    if (lists.empty() || lists.back().window_id != f[0]) {
      lists.emplace_back();
      lists.back().window_id = f[0];
    }
    NBestList& list = lists.back();
    if (std::stoul(f[1]) != list.hyps.size()) {
      throw CorpusError("N-best ranks out of order at line " + std::to_string(line_no));
    }
    Hypothesis h;
    h.lp_mt = parse_double(f[2]);
    h.lp_coref = parse_double(f[3]);
    h.joint = h.lp_mt;
    Tokens toks = split_whitespace(f[4]);
    if (!toks.empty() && toks.back() == vocab.token(Vocab::kEos)) {
      toks.pop_back();
      h.finished = true;
    }
    h.ids = vocab.encode(toks);
    list.hyps.push_back(std::move(h));
    list.beam_size = static_cast<int>(list.hyps.size());
  }
  return lists;
}

}  // namespace corefmt
