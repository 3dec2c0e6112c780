#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace corefmt {

enum class CorefMode {
  kNone,     // translation only ("Base Doc")
  kFused,    // coreference over the fused encoder/decoder layer
  kEncoder,  // coreference over an extra encoder layer only (ablation)
};

std::string to_string(CorefMode mode);
CorefMode coref_mode_from_string(const std::string& s);

struct ModelConfig {
  // Transformer.
  int d_model = 32;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int heads = 4;
  int ffn_dim = 64;
  int vocab_size = 0;  // filled from the vocabulary
  int max_len = 256;
  double dropout_mt = 0.1;
  double label_smoothing = 0.1;

  // Context window and joint objective.
  int window = 4;
  double alpha = 2.0;
  double beta = 0.0;

  // Coreference head.
  CorefMode coref_mode = CorefMode::kFused;
  bool coref_embedding = false;  // coreference-shared positional embedding baseline
  double top_lambda = 0.4;
  int max_span_len = 10;
  int max_clusters = 8;
  double dropout_coref = 0.3;
  bool dropout_coref_in_layer = false;
  int coref_hidden = 32;

  // Optimizer.
  double lr = 7e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;

  // Preprocessing.
  int num_merges = 1000;

  // Throws std::invalid_argument on inconsistent settings.
  void validate() const;

  // Base Transformer sizes with full-size coreference settings.
  static ModelConfig full_preset();
};

struct TrainOptions {
  int epochs = 40;
  int batch_size = 32;
  int warmup_steps = 400;
  int patience = 5;
  std::uint64_t seed = 1;
  bool length_normalize = false;
  int beam_size = 5;
};

// Applies one flat `key = value` setting. Returns false for unknown keys.
bool apply_setting(ModelConfig& model, TrainOptions& train, const std::string& key, const std::string& value);

// Reads a flat key/value file ('#' comments). Unknown keys are an error.
void load_config(const std::filesystem::path& path, ModelConfig& model, TrainOptions& train);

// Shortest representation that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s);

std::map<std::string, std::string> config_to_map(const ModelConfig& model);
std::string format_config(const ModelConfig& model, const TrainOptions& train);

}  // namespace corefmt
