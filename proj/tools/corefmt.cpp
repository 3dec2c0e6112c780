// Command-line front end. Exit codes: 0 success, 1 runtime failure, 2 bad
// usage or a missing input file.
//
// Settings come from three layers: built-in defaults, then flags (--seed,
// -m, --set key=value), then the --config file, which wins.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "corefmt/coref.hpp"
#include "corefmt/evaluation.hpp"
#include "corefmt/experiments.hpp"
#include "corefmt/inference.hpp"
#include "corefmt/io.hpp"
#include "corefmt/subword.hpp"
#include "corefmt/training.hpp"

using namespace corefmt;
namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Settings {
  std::string config;
  std::vector<std::string> sets;
  std::uint64_t seed = 1;
  bool explicit_model = false;  // a config file describes the model, so loaded checkpoints must match it

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config, "key = value settings file; overrides flags")->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "override one setting, key=value (repeatable)");
    cmd->add_option("--seed", seed, "seed for every random stream")->capture_default_str();
  }

  void resolve(ModelConfig& mc, TrainOptions& to) {
    to.seed = seed;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got " + s);
      if (!apply_setting(mc, to, s.substr(0, eq), s.substr(eq + 1))) throw UsageError("unknown setting " + s.substr(0, eq));
    }
    if (!config.empty()) load_config(config, mc, to);
    explicit_model = !config.empty();
  }
};

Model load_model(const fs::path& path, const Settings& settings, const ModelConfig& expected) {
  Model m = load_checkpoint(path);
  if (settings.explicit_model) check_compatible(expected, m);
  return m;
}

std::vector<Example> examples_of(const std::vector<DocumentWindow>& windows, const Vocab& vocab, bool strict) {
  std::vector<Example> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(make_example(w, vocab, strict));
  return out;
}

std::string window_id(const DocumentWindow& w) { return w.doc_id + ':' + std::to_string(w.index); }

// preprocess ---------------------------------------------------------------

struct PreprocessArgs {
  std::string src, tgt, clusters, out, merges;
  int m = 4;
};

int cmd_preprocess(const PreprocessArgs& a, Settings& s) {
  ModelConfig mc;
  TrainOptions to;
  mc.window = a.m;
  s.resolve(mc, to);
  const auto records = a.clusters.empty() ? std::vector<CorefClusterSet>{} : read_cluster_sidecar(a.clusters);
  auto docs = read_paired_documents(a.src, a.tgt, records);
  const fs::path out = a.out;
  fs::create_directories(out);

  // num_merges = 0 without a merges file keeps whole words.
  std::optional<BpeModel> bpe;
  if (!a.merges.empty()) {
    bpe = read_merges(a.merges);
  } else if (mc.num_merges > 0) {
    std::vector<Tokens> corpus;
    for (const auto& d : docs) {
      corpus.insert(corpus.end(), d.sentences_src.begin(), d.sentences_src.end());
      corpus.insert(corpus.end(), d.sentences_tgt.begin(), d.sentences_tgt.end());
    }
    bpe = learn_subword(corpus, mc.num_merges);
  }
  if (bpe) {
    for (auto& d : docs) d = segment_document(*bpe, d);
    write_merges(out / "bpe.merges", *bpe);
  }
  const auto windows = windows_of(docs, mc.window);
  write_window_set(out, windows);
  std::vector<std::string> refs;
  for (const auto& w : windows) refs.push_back(join_tokens(detokenize(last_sentence(w.tgt_joined))));
  write_lines(out / "windows.ref", refs);
  std::cerr << "preprocess: " << docs.size() << " documents, " << windows.size() << " windows, m=" << mc.window << '\n';
  return 0;
}

// train --------------------------------------------------------------------

struct TrainArgs {
  std::string data, valid, out;
};

int cmd_train(const TrainArgs& a, Settings& s) {
  ModelConfig mc;
  TrainOptions to;
  s.resolve(mc, to);
  const auto windows = read_window_set(a.data);
  if (windows.empty()) throw UsageError("no training windows in " + a.data);
  mc.window = static_cast<int>(windows.front().src_sentences.size());
  std::vector<Tokens> seqs;
  for (const auto& w : windows) {
    seqs.push_back(w.src_joined);
    seqs.push_back(w.tgt_joined);
  }
  Model model = make_model(mc, Vocab::build(seqs), to.seed);
  const auto train_set = examples_of(windows, model.vocab, true);
  const auto valid = a.valid.empty() ? std::vector<Example>{} : examples_of(read_window_set(a.valid), model.vocab, false);

  const fs::path out = a.out;
  fs::create_directories(out);
  std::ofstream log(out / "train.log");
  TrainHooks hooks;
  hooks.log = &log;
  hooks.checkpoint_dir = out;
  hooks.on_epoch = [](const TrainState&, const EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << " mt " << r.train.mt << " coref " << r.train.coref << " valid_mt " << r.valid.mt
              << " valid_coref " << r.valid.coref << '\n';
  };
  const TrainState st = train(std::move(model), train_set, valid, to, hooks);
  save_checkpoint(out / "model.ckpt", st.model);
  std::cerr << "train: " << st.step << " steps, " << st.epoch << " epochs" << (st.stopped_early ? " (early stop)" : "")
            << '\n';
  return 0;
}

// translate ----------------------------------------------------------------

struct TranslateArgs {
  std::string model, data, nbest, output;
  int beam = 0;
};

int cmd_translate(const TranslateArgs& a, Settings& s) {
  ModelConfig mc;
  TrainOptions to;
  s.resolve(mc, to);
  const Model model = load_model(a.model, s, mc);
  const auto windows = read_window_set(a.data);
  const auto examples = examples_of(windows, model.vocab, false);
  BeamOptions opts;
  opts.beam = a.beam > 0 ? a.beam : to.beam_size;
  opts.length_normalize = to.length_normalize;
  std::vector<NBestList> lists;
  std::vector<std::string> top;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const CorefClusterSet* clusters = model.config.coref_embedding ? &examples[i].clusters : nullptr;
    NBestList nb = beam_search(model, examples[i].src, opts, clusters);
    attach_coref_scores(nb, examples[i].clusters, model);
    nb.window_id = window_id(windows[i]);
    top.push_back(join_tokens(output_tokens(model.vocab, nb.hyps.front().ids)));
    lists.push_back(std::move(nb));
  }
  write_nbest(a.nbest, lists, model.vocab);
  if (!a.output.empty()) write_lines(a.output, top);
  std::cerr << "translate: " << lists.size() << " windows, beam " << opts.beam << '\n';
  return 0;
}

// rerank -------------------------------------------------------------------

struct RerankArgs {
  std::string model, nbest, output, nbest_out, tune, refs;
  std::optional<double> beta;
};

std::vector<Tokens> read_token_lines(const fs::path& path) {
  std::vector<Tokens> out;
  for (const auto& line : read_lines(path)) out.push_back(split_whitespace(line));
  return out;
}

int cmd_rerank(const RerankArgs& a, Settings& s) {
  ModelConfig mc;
  TrainOptions to;
  s.resolve(mc, to);
  // Only the vocabulary is needed; every score comes from the N-best file.
  const Model model = load_model(a.model, s, mc);
  double beta = model.config.beta;
  if (a.beta) beta = *a.beta;
  if (!a.tune.empty()) {
    if (a.beta) throw UsageError("--beta and --tune are exclusive");
    if (a.refs.empty()) throw UsageError("--tune needs --refs");
    const auto choice = tune_beta(read_nbest(a.tune, model.vocab), read_token_lines(a.refs), model.vocab);
    beta = choice.beta;
    std::cout << "valid_bleu\t" << format_double(choice.bleu) << '\n';
  }
  std::vector<NBestList> reranked;
  std::vector<std::string> top;
  for (const auto& nb : read_nbest(a.nbest, model.vocab)) {
    reranked.push_back(rerank_cached(nb, beta));
    top.push_back(join_tokens(output_tokens(model.vocab, reranked.back().hyps.front().ids)));
  }
  write_lines(a.output, top);
  if (!a.nbest_out.empty()) write_nbest(a.nbest_out, reranked, model.vocab);
  std::cout << "beta\t" << format_double(beta) << '\n';
  return 0;
}

// evaluate -----------------------------------------------------------------

struct EvaluateArgs {
  std::string hyp, ref, model, data, contrastive;
};

int cmd_evaluate(const EvaluateArgs& a, Settings& s) {
  ModelConfig mc;
  TrainOptions to;
  s.resolve(mc, to);
  if (a.hyp.empty() != a.ref.empty()) throw UsageError("--hyp and --ref go together");
  if (a.hyp.empty() && a.model.empty()) throw UsageError("nothing to evaluate: give --hyp/--ref or --model");
  if (!a.model.empty() && a.data.empty() && a.contrastive.empty()) throw UsageError("--model needs --data or --contrastive");
  if (!a.hyp.empty()) std::cout << "bleu\t" << format_double(corpus_bleu(read_token_lines(a.hyp), read_token_lines(a.ref))) << '\n';
  if (a.model.empty()) return 0;

  const Model model = load_model(a.model, s, mc);
  if (!a.data.empty()) {
    const auto examples = examples_of(read_window_set(a.data), model.vocab, false);
    std::cout << "token_accuracy\t" << format_double(token_accuracy(model, examples).ratio()) << '\n';
    if (model.config.coref_mode != CorefMode::kNone) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& ex : examples) {
        if (ex.clusters.empty()) continue;
        sum += muc_score(predict_clusters(model, ex.src, ex.tgt), ex.clusters).f1;
        ++n;
      }
      std::cout << "muc_f1\t" << format_double(n ? sum / static_cast<double>(n) : 0.0) << '\n';
    }
  }
  if (!a.contrastive.empty()) {
    const auto report = contrastive_accuracy(read_contrastive_set(a.contrastive), model);
    for (const auto& [category, ct] : report.counts) {
      std::cout << "contrastive\t" << category << '\t' << format_double(report.accuracy(category)) << '\t' << ct.first
                << '/' << ct.second << '\n';
    }
    std::cout << "contrastive\toverall\t" << format_double(report.overall()) << '\n';
  }
  return 0;
}

// heatmap ------------------------------------------------------------------

struct HeatmapArgs {
  std::string model, data, out, source = "encoder";
  std::size_t window = 0;
};

int cmd_heatmap(const HeatmapArgs& a, Settings& s) {
  ModelConfig mc;
  TrainOptions to;
  s.resolve(mc, to);
  const Model model = load_model(a.model, s, mc);
  const auto windows = read_window_set(a.data);
  if (a.window >= windows.size()) throw UsageError("--window " + std::to_string(a.window) + " out of range");
  const Example ex = make_example(windows[a.window], model.vocab, false);
  const bool coref = a.source == "coref";
  const Matrix hm = attention_heatmap(model, ex.src, coref ? HeatmapSource::kCoref : HeatmapSource::kEncoder, ex.tgt);
  std::ofstream out(a.out);
  if (!out) throw std::runtime_error("cannot write " + a.out);
  write_heatmap(out, hm, coref ? "coref" : "encoder.last", fs::path(a.model).stem().string());
  return 0;
}

// experiments --------------------------------------------------------------

struct ExperimentsArgs {
  std::string corpus, grid, kind, work_dir = "experiments", report, table, merges;
  bool train_missing = false;
  int beam = 0;
};

std::vector<Document> read_split(const fs::path& dir, const std::string& name, const std::optional<BpeModel>& bpe) {
  const auto src = dir / (name + ".src");
  const auto tgt = dir / (name + ".tgt");
  const auto clusters = dir / (name + ".clusters");
  if (!fs::exists(src) || !fs::exists(tgt)) throw UsageError("missing input file: " + src.string() + " or " + tgt.string());
  auto docs = read_paired_documents(src, tgt, fs::exists(clusters) ? read_cluster_sidecar(clusters) : std::vector<CorefClusterSet>{});
  if (bpe) {
    for (auto& d : docs) d = segment_document(*bpe, d);
  }
  return docs;
}

int cmd_experiments(const ExperimentsArgs& a, Settings& s) {
  ExperimentConfig cfg;
  s.resolve(cfg.model, cfg.train);
  std::string kind = a.kind;
  if (!a.grid.empty()) {
    const auto eq = a.grid.find('=');
    if (eq == std::string::npos) throw UsageError("--grid expects name=v1,v2,...");
    const std::string key = a.grid.substr(0, eq);
    if (!kind.empty() && experiment_kind_from_string(kind) != experiment_kind_from_string(key)) {
      throw UsageError("--grid " + key + " conflicts with --kind " + kind);
    }
    kind = key;
    std::stringstream values(a.grid.substr(eq + 1));
    for (std::string v; std::getline(values, v, ',');) cfg.grid.push_back(parse_double(v));
  }
  if (kind.empty()) throw UsageError("give --kind or --grid");
  try {
    cfg.kind = experiment_kind_from_string(kind);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  cfg.work_dir = a.work_dir;
  cfg.train_missing = a.train_missing;
  cfg.beam = a.beam > 0 ? a.beam : cfg.train.beam_size;

  std::optional<BpeModel> bpe;
  if (!a.merges.empty()) bpe = read_merges(a.merges);
  SuiteData data{read_split(a.corpus, "train", bpe), read_split(a.corpus, "valid", bpe), read_split(a.corpus, "test", bpe)};
  const Report report = run_experiment_suite(cfg, data);

  const fs::path report_path = a.report.empty() ? cfg.work_dir / (to_string(cfg.kind) + ".report.jsonl") : fs::path(a.report);
  const fs::path table_path = a.table.empty() ? cfg.work_dir / (to_string(cfg.kind) + ".tsv") : fs::path(a.table);
  std::ofstream(report_path) << [&] {
    std::ostringstream o;
    write_report(o, report);
    return o.str();
  }();
  std::ostringstream table;
  write_report_table(table, report);
  std::ofstream(table_path) << table.str();
  std::cout << table.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* wd = std::getenv("COREFMT_WORKDIR")) {
    std::error_code ec;
    fs::current_path(wd, ec);
    if (ec) {
      std::cerr << "error: COREFMT_WORKDIR " << wd << ": " << ec.message() << '\n';
      return 2;
    }
  }

  CLI::App app{"Context-aware translation with a jointly trained coreference model"};
  app.require_subcommand(1);
  Settings settings;
  std::function<int()> run;

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "segment documents and write m-to-m window sets");
  p->add_option("--src", pre.src, "source text, one sentence per line, blank line between documents")->required()->check(CLI::ExistingFile);
  p->add_option("--tgt", pre.tgt, "target text aligned with --src")->required()->check(CLI::ExistingFile);
  p->add_option("--clusters", pre.clusters, "cluster sidecar, one record per document")->check(CLI::ExistingFile);
  p->add_option("--merges", pre.merges, "reuse an existing merges file")->check(CLI::ExistingFile);
  p->add_option("--out", pre.out, "output directory")->required();
  p->add_option("-m,--window", pre.m, "sentences per window")->capture_default_str();
  settings.add_to(p);
  p->callback([&] { run = [&] { return cmd_preprocess(pre, settings); }; });

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model on a window set");
  t->add_option("--data", tr.data, "training window set")->required()->check(CLI::ExistingDirectory);
  t->add_option("--valid", tr.valid, "validation window set (enables early stopping)")->check(CLI::ExistingDirectory);
  t->add_option("--out", tr.out, "output directory for checkpoints and train.log")->required();
  settings.add_to(t);
  t->callback([&] { run = [&] { return cmd_train(tr, settings); }; });

  TranslateArgs tl;
  auto* d = app.add_subcommand("translate", "beam search into an N-best file");
  d->add_option("--model", tl.model, "checkpoint")->required()->check(CLI::ExistingFile);
  d->add_option("--data", tl.data, "window set to translate")->required()->check(CLI::ExistingDirectory);
  d->add_option("--nbest", tl.nbest, "N-best output file")->required();
  d->add_option("--output", tl.output, "top hypothesis per window");
  d->add_option("--beam", tl.beam, "beam size (default: beam_size setting)");
  settings.add_to(d);
  d->callback([&] { run = [&] { return cmd_translate(tl, settings); }; });

  RerankArgs rr;
  auto* r = app.add_subcommand("rerank", "rerank an N-best file offline by joint score");
  r->add_option("--model", rr.model, "checkpoint (vocabulary only)")->required()->check(CLI::ExistingFile);
  r->add_option("--nbest", rr.nbest, "N-best file from translate")->required()->check(CLI::ExistingFile);
  r->add_option("--output", rr.output, "top hypothesis per window after reranking")->required();
  r->add_option("--nbest-out", rr.nbest_out, "reranked N-best file");
  r->add_option("--beta", rr.beta, "weight of the coreference score");
  r->add_option("--tune", rr.tune, "tune beta on this validation N-best file")->check(CLI::ExistingFile);
  r->add_option("--refs", rr.refs, "references for --tune, one per window")->check(CLI::ExistingFile);
  settings.add_to(r);
  r->callback([&] { run = [&] { return cmd_rerank(rr, settings); }; });

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "BLEU, MUC, token accuracy and contrastive scores");
  e->add_option("--hyp", ev.hyp, "hypotheses, one per line")->check(CLI::ExistingFile);
  e->add_option("--ref", ev.ref, "references, one per line")->check(CLI::ExistingFile);
  e->add_option("--model", ev.model, "checkpoint")->check(CLI::ExistingFile);
  e->add_option("--data", ev.data, "window set for MUC and token accuracy")->check(CLI::ExistingDirectory);
  e->add_option("--contrastive", ev.contrastive, "contrastive test set")->check(CLI::ExistingFile);
  settings.add_to(e);
  e->callback([&] { run = [&] { return cmd_evaluate(ev, settings); }; });

  HeatmapArgs hm;
  auto* h = app.add_subcommand("heatmap", "dump averaged self-attention of one window");
  h->add_option("--model", hm.model, "checkpoint")->required()->check(CLI::ExistingFile);
  h->add_option("--data", hm.data, "window set")->required()->check(CLI::ExistingDirectory);
  h->add_option("--window", hm.window, "window index")->capture_default_str();
  h->add_option("--source", hm.source, "encoder or coref")->check(CLI::IsMember({"encoder", "coref"}))->capture_default_str();
  h->add_option("--out", hm.out, "output file")->required();
  settings.add_to(h);
  h->callback([&] { run = [&] { return cmd_heatmap(hm, settings); }; });

  ExperimentsArgs ex;
  auto* x = app.add_subcommand("experiments", "run one experiment sweep and write its report");
  x->add_option("--corpus", ex.corpus, "directory with {train,valid,test}.{src,tgt,clusters}")->required()->check(CLI::ExistingDirectory);
  x->add_option("--grid", ex.grid, "sweep, e.g. m=2,3,4 or alpha=0.8,1,2");
  x->add_option("--kind", ex.kind, "context, corpus_size, pruning, alpha or beta (default grid)");
  x->add_option("--work-dir", ex.work_dir, "checkpoints and outputs per condition")->capture_default_str();
  x->add_option("--report", ex.report, "JSON lines report (default: <work-dir>/<kind>.report.jsonl)");
  x->add_option("--table", ex.table, "TSV table (default: <work-dir>/<kind>.tsv)");
  x->add_option("--merges", ex.merges, "segment the corpus with this merges file")->check(CLI::ExistingFile);
  x->add_option("--beam", ex.beam, "beam size (default: beam_size setting)");
  x->add_flag("--train-missing", ex.train_missing, "train conditions that have no checkpoint");
  settings.add_to(x);
  x->callback([&] { run = [&] { return cmd_experiments(ex, settings); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }
  try {
    return run();
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
}
