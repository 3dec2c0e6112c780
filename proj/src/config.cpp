#include "corefmt/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace corefmt {

std::string to_string(CorefMode mode) {
  switch (mode) {
    case CorefMode::kNone: return "none";
    case CorefMode::kFused: return "fused";
    case CorefMode::kEncoder: return "encoder";
  }
  return "none";
}

CorefMode coref_mode_from_string(const std::string& s) {
  if (s == "none") return CorefMode::kNone;
  if (s == "fused") return CorefMode::kFused;
  if (s == "encoder") return CorefMode::kEncoder;
  throw std::invalid_argument("unknown coref_mode: " + s);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw std::invalid_argument("not a number: " + s);
  return v;
}

namespace {

long long parse_int(const std::string& s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("not an integer: " + s);
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "no") return false;
  throw std::invalid_argument("not a boolean: " + s);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool check_probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& why) { throw std::invalid_argument("invalid config: " + why); };
  if (d_model <= 0 || heads <= 0 || d_model % heads != 0) fail("d_model must be a positive multiple of heads");
  if (encoder_layers < 0 || decoder_layers < 0) fail("layer counts must be non-negative");
  if (ffn_dim <= 0) fail("ffn_dim must be positive");
  if (max_len <= 0) fail("max_len must be positive");
  if (!check_probability(dropout_mt) || dropout_mt >= 1.0) fail("dropout_mt must be in [0, 1)");
  if (!check_probability(dropout_coref) || dropout_coref >= 1.0) fail("dropout_coref must be in [0, 1)");
  if (!check_probability(label_smoothing)) fail("label_smoothing must be in [0, 1]");
  if (!(top_lambda > 0.0 && top_lambda <= 1.0)) fail("top_lambda must be in (0, 1]");
  if (alpha < 0.0) fail("alpha must be non-negative");
  if (window < 1) fail("window must be >= 1");
  if (max_span_len < 1) fail("max_span_len must be >= 1");
  if (max_clusters < 0) fail("max_clusters must be non-negative");
  if (coref_hidden <= 0) fail("coref_hidden must be positive");
  if (lr <= 0.0) fail("lr must be positive");
  if (num_merges < 0) fail("num_merges must be non-negative");
}

ModelConfig ModelConfig::full_preset() {
  ModelConfig c;
  c.d_model = 512;
  c.encoder_layers = 6;
  c.decoder_layers = 6;
  c.heads = 8;
  c.ffn_dim = 2048;
  c.max_len = 1024;
  c.dropout_mt = 0.1;
  c.label_smoothing = 0.1;
  c.window = 4;
  c.alpha = 2.0;
  c.top_lambda = 0.4;
  c.max_span_len = 10;
  c.max_clusters = 8;
  c.dropout_coref = 0.3;
  c.coref_hidden = 512;
  c.lr = 7e-5;
  c.num_merges = 32000;
  return c;
}

bool apply_setting(ModelConfig& m, TrainOptions& t, const std::string& key, const std::string& value) {
  static const std::map<std::string, std::function<void(ModelConfig&, TrainOptions&, const std::string&)>> setters = {
      {"d_model", [](auto& m, auto&, const auto& v) { m.d_model = static_cast<int>(parse_int(v)); }},
      {"encoder_layers", [](auto& m, auto&, const auto& v) { m.encoder_layers = static_cast<int>(parse_int(v)); }},
      {"decoder_layers", [](auto& m, auto&, const auto& v) { m.decoder_layers = static_cast<int>(parse_int(v)); }},
      {"heads", [](auto& m, auto&, const auto& v) { m.heads = static_cast<int>(parse_int(v)); }},
      {"ffn_dim", [](auto& m, auto&, const auto& v) { m.ffn_dim = static_cast<int>(parse_int(v)); }},
      {"vocab_size", [](auto& m, auto&, const auto& v) { m.vocab_size = static_cast<int>(parse_int(v)); }},
      {"max_len", [](auto& m, auto&, const auto& v) { m.max_len = static_cast<int>(parse_int(v)); }},
      {"dropout_mt", [](auto& m, auto&, const auto& v) { m.dropout_mt = parse_double(v); }},
      {"label_smoothing", [](auto& m, auto&, const auto& v) { m.label_smoothing = parse_double(v); }},
      {"window", [](auto& m, auto&, const auto& v) { m.window = static_cast<int>(parse_int(v)); }},
      {"alpha", [](auto& m, auto&, const auto& v) { m.alpha = parse_double(v); }},
      {"beta", [](auto& m, auto&, const auto& v) { m.beta = parse_double(v); }},
      {"coref_mode", [](auto& m, auto&, const auto& v) { m.coref_mode = coref_mode_from_string(v); }},
      {"coref_embedding", [](auto& m, auto&, const auto& v) { m.coref_embedding = parse_bool(v); }},
      {"top_lambda", [](auto& m, auto&, const auto& v) { m.top_lambda = parse_double(v); }},
      {"max_span_len", [](auto& m, auto&, const auto& v) { m.max_span_len = static_cast<int>(parse_int(v)); }},
      {"max_clusters", [](auto& m, auto&, const auto& v) { m.max_clusters = static_cast<int>(parse_int(v)); }},
      {"dropout_coref", [](auto& m, auto&, const auto& v) { m.dropout_coref = parse_double(v); }},
      {"dropout_coref_in_layer", [](auto& m, auto&, const auto& v) { m.dropout_coref_in_layer = parse_bool(v); }},
      {"coref_hidden", [](auto& m, auto&, const auto& v) { m.coref_hidden = static_cast<int>(parse_int(v)); }},
      {"lr", [](auto& m, auto&, const auto& v) { m.lr = parse_double(v); }},
      {"adam_beta1", [](auto& m, auto&, const auto& v) { m.adam_beta1 = parse_double(v); }},
      {"adam_beta2", [](auto& m, auto&, const auto& v) { m.adam_beta2 = parse_double(v); }},
      {"adam_eps", [](auto& m, auto&, const auto& v) { m.adam_eps = parse_double(v); }},
      {"num_merges", [](auto& m, auto&, const auto& v) { m.num_merges = static_cast<int>(parse_int(v)); }},
      {"epochs", [](auto&, auto& t, const auto& v) { t.epochs = static_cast<int>(parse_int(v)); }},
      {"batch_size", [](auto&, auto& t, const auto& v) { t.batch_size = static_cast<int>(parse_int(v)); }},
      {"warmup_steps", [](auto&, auto& t, const auto& v) { t.warmup_steps = static_cast<int>(parse_int(v)); }},
      {"patience", [](auto&, auto& t, const auto& v) { t.patience = static_cast<int>(parse_int(v)); }},
      {"seed", [](auto&, auto& t, const auto& v) { t.seed = static_cast<std::uint64_t>(parse_int(v)); }},
      {"length_normalize", [](auto&, auto& t, const auto& v) { t.length_normalize = parse_bool(v); }},
      {"beam_size", [](auto&, auto& t, const auto& v) { t.beam_size = static_cast<int>(parse_int(v)); }},
  };
  auto it = setters.find(key);
  if (it == setters.end()) return false;
  it->second(m, t, value);
  return true;
}

void load_config(const std::filesystem::path& path, ModelConfig& model, TrainOptions& train) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!apply_setting(model, train, key, value)) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
}

std::map<std::string, std::string> config_to_map(const ModelConfig& m) {
  return {
      {"d_model", std::to_string(m.d_model)},
      {"encoder_layers", std::to_string(m.encoder_layers)},
      {"decoder_layers", std::to_string(m.decoder_layers)},
      {"heads", std::to_string(m.heads)},
      {"ffn_dim", std::to_string(m.ffn_dim)},
      {"vocab_size", std::to_string(m.vocab_size)},
      {"max_len", std::to_string(m.max_len)},
      {"dropout_mt", format_double(m.dropout_mt)},
      {"label_smoothing", format_double(m.label_smoothing)},
      {"window", std::to_string(m.window)},
      {"alpha", format_double(m.alpha)},
      {"beta", format_double(m.beta)},
      {"coref_mode", to_string(m.coref_mode)},
      {"coref_embedding", m.coref_embedding ? "true" : "false"},
      {"top_lambda", format_double(m.top_lambda)},
      {"max_span_len", std::to_string(m.max_span_len)},
      {"max_clusters", std::to_string(m.max_clusters)},
      {"dropout_coref", format_double(m.dropout_coref)},
      {"dropout_coref_in_layer", m.dropout_coref_in_layer ? "true" : "false"},
      {"coref_hidden", std::to_string(m.coref_hidden)},
      {"lr", format_double(m.lr)},
      {"adam_beta1", format_double(m.adam_beta1)},
      {"adam_beta2", format_double(m.adam_beta2)},
      {"adam_eps", format_double(m.adam_eps)},
      {"num_merges", std::to_string(m.num_merges)},
  };
}

std::string format_config(const ModelConfig& model, const TrainOptions& t) {
  std::ostringstream out;
  for (const auto& [k, v] : config_to_map(model)) out << k << " = " << v << '\n';
  out << "epochs = " << t.epochs << '\n'
      << "batch_size = " << t.batch_size << '\n'
      << "warmup_steps = " << t.warmup_steps << '\n'
      << "patience = " << t.patience << '\n'
      << "seed = " << t.seed << '\n'
      << "length_normalize = " << (t.length_normalize ? "true" : "false") << '\n'
      << "beam_size = " << t.beam_size << '\n';
  return out.str();
}

}  // namespace corefmt
