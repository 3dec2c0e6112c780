#include "corefmt/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "corefmt/layers.hpp"
#include "corefmt/rng.hpp"

namespace corefmt {

namespace {

std::atomic<std::uint64_t> g_network_calls{0};

std::string layer_name(const char* side, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s.layer%02d", side, i);
  return buf;
}

void check_length(const ModelConfig& cfg, std::size_t n, const char* what) {
  if (n > static_cast<std::size_t>(cfg.max_len)) {
    throw std::length_error(std::string(what) + " length " + std::to_string(n) + " exceeds max_len " +
                            std::to_string(cfg.max_len));
  }
}

void check_ids(const Model& model, const std::vector<int>& ids) {
  for (int id : ids) {
    if (id < 0 || id >= model.vocab.size()) throw std::out_of_range("token id outside the vocabulary");
  }
}

Var embed(Graph& g, const Model& model, const char* table, const std::vector<int>& ids) {
  const double scale_by = std::sqrt(static_cast<double>(model.config.d_model));
  return scale(g, gather_rows(g, g.parameter(model.params.at(table)), ids), scale_by);
}

}  // namespace

std::uint64_t network_calls() { return g_network_calls.load(); }

Model make_model(ModelConfig config, Vocab vocab, std::uint64_t seed) {
  config.vocab_size = vocab.size();
  config.validate();
  Model model{config, std::move(vocab), {}};
  auto rng = make_stream(seed, "init.mt");
  const int d = config.d_model;
  const int v = config.vocab_size;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<double> unif(-bound, bound);
  for (const char* table : {"enc.embed", "dec.embed"}) {
    Matrix e(v, d);
    for (double& x : e.values()) x = unif(rng);
    model.params.add(table, std::move(e));
  }
  for (int i = 0; i < config.encoder_layers; ++i) init_encoder_layer(model.params, layer_name("enc", i), d, config.ffn_dim, rng);
  for (int i = 0; i < config.decoder_layers; ++i) init_decoder_layer(model.params, layer_name("dec", i), d, config.ffn_dim, rng);
  init_linear(model.params, "dec.project", v, d, rng, /*bias=*/false);
  if (config.coref_mode != CorefMode::kNone) init_coref_parameters(model.params, config, config.coref_mode, seed);
  return model;
}

Example make_example(const DocumentWindow& window, const Vocab& vocab, bool strict) {
  Example ex;
  ex.src = vocab.encode(window.src_joined, strict);
  ex.tgt = vocab.encode(window.tgt_joined, strict);
  validate_clusters(window.clusters, window.src_joined);
  ex.clusters = window.clusters;
  return ex;
}

std::vector<int> decoder_input(const std::vector<int>& tgt) {
  std::vector<int> in{Vocab::kBos};
  in.insert(in.end(), tgt.begin(), tgt.end());
  return in;
}

std::vector<int> decoder_output(const std::vector<int>& tgt) {
  std::vector<int> out(tgt);
  out.push_back(Vocab::kEos);
  return out;
}

Matrix coref_position_embedding(std::size_t length, const CorefClusterSet& clusters, std::size_t d) {
  Matrix table = sinusoidal_positions(length, d);
  Matrix out = table;
  std::vector<int> owner(length, -1);
  for (std::size_t k = 0; k < clusters.clusters.size(); ++k) {
    const auto& c = clusters.clusters[k];
    if (c.empty()) continue;
    int leftmost = c.front().start;
    for (const Span& s : c) leftmost = std::min(leftmost, s.start);
    for (const Span& s : c) {
      if (s.start < 0 || s.end < s.start || static_cast<std::size_t>(s.end) >= length) {
        throw CorpusError("span out of range");
      }
      for (int t = s.start; t <= s.end; ++t) {
        if (owner[t] >= 0 && owner[t] != static_cast<int>(k)) throw CorpusError("overlapping clusters");
        if (owner[t] == static_cast<int>(k)) throw CorpusError("overlapping spans in a cluster");
        owner[t] = static_cast<int>(k);
        auto src = table.row(leftmost);
        std::copy(src.begin(), src.end(), out.row(t).begin());
      }
    }
  }
  return out;
}

Var encode(Graph& g, const Model& model, const std::vector<int>& src, const CorefClusterSet* clusters,
           std::mt19937_64* rng, AttentionTrace* trace) {
  const ModelConfig& cfg = model.config;
  check_length(cfg, src.size(), "source");
  check_ids(model, src);
  ++g_network_calls;
  const std::size_t d = static_cast<std::size_t>(cfg.d_model);
  Matrix pos = sinusoidal_positions(src.size(), d);
  if (cfg.coref_embedding) {
    const CorefClusterSet none;
    const Matrix shared = coref_position_embedding(src.size(), clusters ? *clusters : none, d);
    for (std::size_t i = 0; i < pos.size(); ++i) pos.data()[i] += shared.data()[i];
  }
  Var h = add(g, embed(g, model, "enc.embed", src), g.constant(std::move(pos)));
  h = dropout(g, h, cfg.dropout_mt, rng);
  if (trace) trace->encoder_self.assign(cfg.encoder_layers, {});
  for (int i = 0; i < cfg.encoder_layers; ++i) {
    h = encoder_layer(g, model.params, layer_name("enc", i), h, cfg.heads, cfg.dropout_mt, rng,
                      trace ? &trace->encoder_self[i] : nullptr);
  }
  return h;
}

Var decode(Graph& g, const Model& model, const std::vector<int>& dec_in, Var enc, std::mt19937_64* rng) {
  const ModelConfig& cfg = model.config;
  check_length(cfg, dec_in.size(), "target");
  check_ids(model, dec_in);
  if (dec_in.empty() || dec_in.front() != Vocab::kBos) {
    throw std::invalid_argument("decoder input must start with <bos>");
  }
  Var h = add(g, embed(g, model, "dec.embed", dec_in),
              g.constant(sinusoidal_positions(dec_in.size(), static_cast<std::size_t>(cfg.d_model))));
  h = dropout(g, h, cfg.dropout_mt, rng);
  for (int i = 0; i < cfg.decoder_layers; ++i) {
    h = decoder_layer(g, model.params, layer_name("dec", i), h, enc, cfg.heads, /*causal=*/true, cfg.dropout_mt, rng);
  }
  return h;
}

Var output_logits(Graph& g, const Model& model, Var dec) {
  return matmul_nt(g, dec, g.parameter(model.params.at("dec.project.weight")));
}

Var mt_loss(Graph& g, const Model& model, const Example& ex, Var dec) {
  return smoothed_nll(g, output_logits(g, model, dec), decoder_output(ex.tgt), model.config.label_smoothing);
}

Matrix encode(const Model& model, const std::vector<int>& src, const CorefClusterSet* clusters) {
  Graph g(false);
  return g.value(encode(g, model, src, clusters, nullptr));
}

Matrix decode(const Model& model, const std::vector<int>& dec_in, const Matrix& h_enc) {
  Graph g(false);
  return g.value(decode(g, model, dec_in, g.constant(h_enc), nullptr));
}

Matrix token_log_probs(const Model& model, const Matrix& h_dec) {
  Graph g(false);
  Matrix logits = g.value(output_logits(g, model, g.constant(h_dec)));
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    double mx = row[0];
    for (double x : row) mx = std::max(mx, x);
    double z = 0.0;
    for (double x : row) z += std::exp(x - mx);
    const double lse = mx + std::log(z);
    for (double& x : row) x -= lse;
  }
  return logits;
}

double mt_loss(const Model& model, const std::vector<Example>& batch) {
  double total = 0.0;
  for (const auto& ex : batch) {
    Graph g(false);
    Var enc = encode(g, model, ex.src, &ex.clusters, nullptr);
    Var dec = decode(g, model, decoder_input(ex.tgt), enc, nullptr);
    total += scalar(g, mt_loss(g, model, ex, dec));
  }
  return total;
}

void check_compatible(const ModelConfig& expected, const Model& loaded) {
  if (expected.vocab_size != 0 && expected.vocab_size != loaded.config.vocab_size) {
    throw std::runtime_error("checkpoint vocabulary size " + std::to_string(loaded.config.vocab_size) +
                             " does not match config " + std::to_string(expected.vocab_size));
  }
  if (expected.d_model != loaded.config.d_model) {
    throw std::runtime_error("checkpoint d_model " + std::to_string(loaded.config.d_model) +
                             " does not match config " + std::to_string(expected.d_model));
  }
}

namespace {
constexpr const char* kCheckpointMagic = "corefmt-checkpoint";
constexpr int kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  const auto cfg = config_to_map(model.config);
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "config " << cfg.size() << '\n';
  for (const auto& [k, v] : cfg) out << k << ' ' << v << '\n';
  out << "vocab " << model.vocab.size() << '\n';
  for (const auto& t : model.vocab.tokens()) out << t << '\n';
  out << "tensors " << model.params.size() << '\n';
  char buf[64];
  for (const auto& [name, m] : model.params) {
    out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) {
        std::snprintf(buf, sizeof(buf), "%a", m(r, c));
        out << (c ? " " : "") << buf;
      }
      out << '\n';
    }
  }
  out << "end\n";
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  auto fail = [&](const std::string& why) { return std::runtime_error("bad checkpoint " + path.string() + ": " + why); };
  std::string word;
  int version = 0;
  in >> word >> version;
  if (word != kCheckpointMagic) throw fail("missing header");
  if (version != kCheckpointVersion) throw fail("unsupported version " + std::to_string(version));

  std::size_t n = 0;
  in >> word >> n;
  if (word != "config") throw fail("expected config section");
  ModelConfig cfg;
  TrainOptions unused;
  for (std::size_t i = 0; i < n; ++i) {
    std::string k, v;
    in >> k >> v;
    if (!apply_setting(cfg, unused, k, v)) throw fail("unknown config key " + k);
  }
  in >> word >> n;
  if (word != "vocab") throw fail("expected vocab section");
  std::vector<std::string> tokens(n);
  for (auto& t : tokens) in >> t;
  Model model{cfg, Vocab::from_tokens(tokens), {}};
  if (model.vocab.size() != cfg.vocab_size) throw fail("vocabulary size disagrees with config");

  in >> word >> n;
  if (word != "tensors") throw fail("expected tensors section");
  for (std::size_t i = 0; i < n; ++i) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    in >> word >> name >> rows >> cols;
    if (word != "tensor") throw fail("expected tensor record");
    Matrix m(rows, cols);
    for (double& x : m.values()) {
      in >> word;
      char* end = nullptr;
      x = std::strtod(word.c_str(), &end);
      if (end == word.c_str() || *end != '\0') throw fail("bad number in tensor " + name);
    }
    model.params.add(name, std::move(m));
  }
  in >> word;
  if (word != "end") throw fail("missing end marker");
  model.config.validate();
  return model;
}

}  // namespace corefmt
