#include "corefmt/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include "json.hpp"

#include "corefmt/coref.hpp"
#include "corefmt/evaluation.hpp"
#include "corefmt/inference.hpp"
#include "corefmt/io.hpp"
#include "corefmt/rng.hpp"
#include "corefmt/subword.hpp"
#include "corefmt/training.hpp"

namespace corefmt {

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kContext: return "context";
    case ExperimentKind::kCorpusSize: return "corpus_size";
    case ExperimentKind::kPruning: return "pruning";
    case ExperimentKind::kAlpha: return "alpha";
    case ExperimentKind::kBeta: return "beta";
  }
  return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (auto k : {ExperimentKind::kContext, ExperimentKind::kCorpusSize, ExperimentKind::kPruning, ExperimentKind::kAlpha,
                 ExperimentKind::kBeta}) {
    if (to_string(k) == s) return k;
  }
  if (s == "m") return ExperimentKind::kContext;
  throw std::invalid_argument("unknown experiment: " + s);
}

std::vector<double> default_grid(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kContext: return {2, 3, 4};
    case ExperimentKind::kCorpusSize: return {0.25, 0.5, 1.0};
    case ExperimentKind::kPruning: return {0.0, 0.1, 0.2, 0.3, 0.5};
    case ExperimentKind::kAlpha: return {0.8, 1.0, 2.0, 3.0, 4.0, 10.0};
    case ExperimentKind::kBeta: return {-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0};
  }
  return {};
}

std::string condition_name(ExperimentKind kind, double value) {
  switch (kind) {
    case ExperimentKind::kContext: return "m=" + std::to_string(static_cast<int>(std::lround(value)));
    case ExperimentKind::kCorpusSize: return "size=" + format_double(value);
    case ExperimentKind::kPruning: return "prune=" + format_double(value);
    case ExperimentKind::kAlpha: return "alpha=" + format_double(value);
    case ExperimentKind::kBeta: return "beta=" + format_double(value);
  }
  return "?";
}

double Report::value(const std::string& experiment, const std::string& condition, const std::string& metric) const {
  for (const auto& r : records) {
    if (r.experiment == experiment && r.condition == condition && r.metric == metric) return r.value;
  }
  throw std::out_of_range("no report record " + experiment + "/" + condition + "/" + metric);
}

std::vector<std::string> Report::conditions(const std::string& experiment) const {
  std::vector<std::string> out;
  for (const auto& r : records) {
    if (r.experiment == experiment && std::find(out.begin(), out.end(), r.condition) == out.end()) {
      out.push_back(r.condition);
    }
  }
  return out;
}

std::vector<DocumentWindow> windows_of(const std::vector<Document>& docs, int m) {
  std::vector<DocumentWindow> out;
  for (const auto& d : docs) {
    auto w = sliding_windows(d, m);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

Vocab build_vocab(const std::vector<Document>& docs) {
  std::vector<Tokens> seqs;
  for (const auto& d : docs) {
    seqs.insert(seqs.end(), d.sentences_src.begin(), d.sentences_src.end());
    seqs.insert(seqs.end(), d.sentences_tgt.begin(), d.sentences_tgt.end());
  }
  return Vocab::build(seqs);
}

namespace {

std::string window_id(const DocumentWindow& w) { return w.doc_id + ":" + std::to_string(w.index); }

std::vector<Example> examples_of(const std::vector<DocumentWindow>& windows, const Vocab& vocab, bool strict) {
  std::vector<Example> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(make_example(w, vocab, strict));
  return out;
}

struct Decoded {
  std::vector<DocumentWindow> windows;
  std::vector<Example> examples;
  std::vector<NBestList> nbest;
  std::vector<Tokens> references;
};

Decoded decode_split(const Model& model, const std::vector<Document>& docs, int beam) {
  Decoded d;
  d.windows = windows_of(docs, model.config.window);
  d.examples = examples_of(d.windows, model.vocab, /*strict=*/false);
  BeamOptions opts;
  opts.beam = beam;
  for (std::size_t i = 0; i < d.windows.size(); ++i) {
    const CorefClusterSet* clusters = model.config.coref_embedding ? &d.examples[i].clusters : nullptr;
    NBestList nb = beam_search(model, d.examples[i].src, opts, clusters);
    nb.window_id = window_id(d.windows[i]);
    d.nbest.push_back(std::move(nb));
    d.references.push_back(detokenize(last_sentence(d.windows[i].tgt_joined)));
  }
  return d;
}

void score_with(std::vector<NBestList>& lists, const std::vector<CorefClusterSet>& clusters, const Model& model) {
  for (std::size_t i = 0; i < lists.size(); ++i) attach_coref_scores(lists[i], clusters[i], model);
}

std::vector<CorefClusterSet> clusters_of(const Decoded& d, double prune, std::uint64_t seed) {
  std::vector<CorefClusterSet> out;
  for (std::size_t i = 0; i < d.examples.size(); ++i) {
    const CorefClusterSet& c = d.examples[i].clusters;
    out.push_back(prune > 0.0 ? prune_clusters(c, prune, make_stream(seed, "prune.window", {i})()) : c);
  }
  return out;
}

std::vector<Tokens> top_outputs(const std::vector<NBestList>& lists, const Vocab& vocab) {
  std::vector<Tokens> out;
  for (const auto& l : lists) out.push_back(output_tokens(vocab, l.hyps.front().ids));
  return out;
}

double mean_muc_f1(const Model& model, const Decoded& d) {
  if (model.config.coref_mode == CorefMode::kNone) return 0.0;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& ex : d.examples) {
    if (ex.clusters.empty()) continue;
    sum += muc_score(predict_clusters(model, ex.src, ex.tgt), ex.clusters).f1;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

class Conditions {
 public:
  Conditions(const ExperimentConfig& cfg, const SuiteData& data) : cfg_(cfg), data_(data), vocab_(build_vocab(data.train)) {}

  const Model& model(const std::string& label, ModelConfig mc, const std::vector<Document>& train_docs) {
    if (auto it = models_.find(label); it != models_.end()) return it->second;
    const auto dir = cfg_.work_dir / to_string(cfg_.kind) / label;
    const auto path = dir / "model.ckpt";
    Model m;
    if (std::filesystem::exists(path)) {
      m = load_checkpoint(path);
      mc.vocab_size = vocab_.size();
      check_compatible(mc, m);
    } else if (!cfg_.train_missing) {
      throw std::runtime_error("missing checkpoint for condition " + to_string(cfg_.kind) + "/" + label + ": " +
                               path.string());
    } else {
      Model init = make_model(mc, vocab_, cfg_.train.seed);
      const auto train_ex = examples_of(windows_of(train_docs, mc.window), vocab_, /*strict=*/true);
      const auto valid_ex = examples_of(windows_of(data_.valid, mc.window), vocab_, /*strict=*/false);
      TrainHooks hooks;
      hooks.checkpoint_dir = dir;
      m = train(std::move(init), train_ex, valid_ex, cfg_.train, hooks).model;
      save_checkpoint(path, m);
    }
    return models_.emplace(label, std::move(m)).first->second;
  }

  const std::pair<Decoded, Decoded>& decoded(const std::string& label, const Model& m) {
    if (auto it = decoded_.find(label); it != decoded_.end()) return it->second;
    auto pair = std::make_pair(decode_split(m, data_.valid, cfg_.beam), decode_split(m, data_.test, cfg_.beam));
    return decoded_.emplace(label, std::move(pair)).first->second;
  }

 private:
  const ExperimentConfig& cfg_;
  const SuiteData& data_;
  Vocab vocab_;
  std::map<std::string, Model> models_;
  std::map<std::string, std::pair<Decoded, Decoded>> decoded_;
};

}  // namespace

Report run_experiment_suite(const ExperimentConfig& config, const SuiteData& data) {
  if (data.train.empty()) throw std::invalid_argument("experiment suite needs training documents");
  if (data.valid.empty() || data.test.empty()) throw std::invalid_argument("experiment suite needs valid and test documents");
  const std::vector<double> grid = config.grid.empty() ? default_grid(config.kind) : config.grid;
  const std::string experiment = to_string(config.kind);
  Conditions conds(config, data);
  Report report;

  for (double v : grid) {
    const std::string cond = condition_name(config.kind, v);
    ModelConfig mc = config.model;
    std::vector<Document> train_docs = data.train;
    std::string model_label = cond;
    double prune = 0.0;
    switch (config.kind) {
      case ExperimentKind::kContext:
        if (v < 1.0) throw std::invalid_argument("context size must be >= 1");
        mc.window = static_cast<int>(std::lround(v));
        break;
      case ExperimentKind::kCorpusSize: {
        if (!(v > 0.0 && v <= 1.0)) throw std::invalid_argument("corpus fraction must be in (0, 1]");
        const auto n = static_cast<std::size_t>(std::ceil(v * static_cast<double>(data.train.size()) - 1e-9));
        train_docs.resize(std::max<std::size_t>(n, 1));
        break;
      }
      case ExperimentKind::kAlpha: mc.alpha = v; break;
      case ExperimentKind::kPruning:
        prune = v;
        model_label = "base";
        break;
      case ExperimentKind::kBeta: model_label = "base"; break;
    }
    const Model& model = conds.model(model_label, mc, train_docs);
    auto [valid, test] = conds.decoded(model_label, model);

    score_with(valid.nbest, clusters_of(valid, prune, config.train.seed), model);
    score_with(test.nbest, clusters_of(test, prune, config.train.seed + 1), model);
    double beta = v;
    if (config.kind != ExperimentKind::kBeta) beta = tune_beta(valid.nbest, valid.references, model.vocab).beta;

    std::vector<NBestList> reranked;
    std::vector<Tokens> oracle;
    for (const auto& nb : test.nbest) {
      reranked.push_back(rerank_cached(nb, beta));
      oracle.push_back(output_tokens(model.vocab, oracle_select(nb, test.references[reranked.size() - 1], model.vocab).ids));
    }
    const auto outputs = top_outputs(reranked, model.vocab);

    const auto dir = config.work_dir / experiment / cond;
    std::filesystem::create_directories(dir);
    std::vector<std::string> lines;
    for (const auto& o : outputs) lines.push_back(join_tokens(o));
    write_lines(dir / "test.hyp", lines);
    write_nbest(dir / "test.nbest", reranked, model.vocab);

    auto add = [&](const std::string& metric, double value) { report.records.push_back({experiment, cond, metric, value}); };
    add("bleu", corpus_bleu(outputs, test.references));
    add("bleu_beam", corpus_bleu(top_outputs(test.nbest, model.vocab), test.references));
    add("bleu_oracle", corpus_bleu(oracle, test.references));
    add("beta", beta);
    add("alpha", model.config.alpha);
    add("window", model.config.window);
    add("train_documents", static_cast<double>(train_docs.size()));
    add("muc_f1", mean_muc_f1(model, test));
  }
  return report;
}

void write_report(std::ostream& out, const Report& report) {
  for (const auto& r : report.records) {
    nlohmann::json j{{"experiment", r.experiment}, {"condition", r.condition}, {"metric", r.metric}, {"value", r.value}};
    out << j.dump() << '\n';
  }
}

Report read_report(std::istream& in) {
  Report report;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      report.records.push_back({j.at("experiment").get<std::string>(), j.at("condition").get<std::string>(),
                                j.at("metric").get<std::string>(), j.at("value").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("malformed report record at line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return report;
}

void write_report_table(std::ostream& out, const Report& report) {
  std::vector<std::string> metrics;
  for (const auto& r : report.records) {
    if (std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end()) metrics.push_back(r.metric);
  }
  out << "experiment\tcondition";
  for (const auto& m : metrics) out << '\t' << m;
  out << '\n';
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& r : report.records) {
    if (std::find(rows.begin(), rows.end(), std::make_pair(r.experiment, r.condition)) == rows.end()) {
      rows.emplace_back(r.experiment, r.condition);
    }
  }
  for (const auto& [e, c] : rows) {
    out << e << '\t' << c;
    for (const auto& m : metrics) {
      out << '\t';
      try {
        out << format_double(report.value(e, c, m));
      } catch (const std::out_of_range&) {
        out << "NA";
      }
    }
    out << '\n';
  }
}

}  // namespace corefmt
