#pragma once

// Encoder-decoder translation model.
//
// Source windows are encoded as-is (no appended end marker). The decoder is
// teacher-forced on <bos> + y and predicts y + <eos>, so a target of length n
// yields n + 1 decoder rows.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "corefmt/autograd.hpp"
#include "corefmt/config.hpp"
#include "corefmt/corpus.hpp"
#include "corefmt/vocab.hpp"

namespace corefmt {

struct Model {
  ModelConfig config;
  Vocab vocab;
  ParameterSet params;
};

// Translation parameters come from one random stream and coreference
// parameters from another, so models that differ only in coref_mode share
// identical translation weights for the same seed.
Model make_model(ModelConfig config, Vocab vocab, std::uint64_t seed);
void init_coref_parameters(ParameterSet& params, const ModelConfig& config, CorefMode mode, std::uint64_t seed);

// One encoded training/inference unit.
struct Example {
  std::vector<int> src;
  std::vector<int> tgt;  // without <bos>/<eos>
  CorefClusterSet clusters;
};

// strict: OOV tokens are an error (training data); otherwise they map to <unk>.
Example make_example(const DocumentWindow& window, const Vocab& vocab, bool strict);

std::vector<int> decoder_input(const std::vector<int>& tgt);
std::vector<int> decoder_output(const std::vector<int>& tgt);

// Random streams for dropout; null pointers disable the corresponding dropout.
struct DropoutStreams {
  std::mt19937_64* mt = nullptr;
  std::mt19937_64* coref = nullptr;
};

struct AttentionTrace {
  std::vector<std::vector<Matrix>> encoder_self;  // [layer][head]
  std::vector<Matrix> coref_self;                 // [head]
};

// Counts encoder invocations; lets callers prove a code path never runs the
// network.
std::uint64_t network_calls();

// Graph-level forward passes.
Var encode(Graph& g, const Model& model, const std::vector<int>& src, const CorefClusterSet* clusters,
           std::mt19937_64* rng, AttentionTrace* trace = nullptr);
Var decode(Graph& g, const Model& model, const std::vector<int>& dec_in, Var enc, std::mt19937_64* rng);
Var output_logits(Graph& g, const Model& model, Var dec);
// Label-smoothed NLL of one example (sum over target positions).
Var mt_loss(Graph& g, const Model& model, const Example& ex, Var dec);

// Value-level wrappers (dropout disabled).
Matrix encode(const Model& model, const std::vector<int>& src, const CorefClusterSet* clusters = nullptr);
Matrix decode(const Model& model, const std::vector<int>& dec_in, const Matrix& h_enc);
Matrix token_log_probs(const Model& model, const Matrix& h_dec);
double mt_loss(const Model& model, const std::vector<Example>& batch);

// Standard sinusoidal table, except every token inside a cluster span takes
// the row of the left-most token of its cluster. Throws CorpusError when
// clusters overlap.
Matrix coref_position_embedding(std::size_t length, const CorefClusterSet& clusters, std::size_t d);

// Refuses to combine a checkpoint with a config whose vocabulary size or
// hidden size disagrees.
void check_compatible(const ModelConfig& expected, const Model& loaded);

// Text container: header, config, vocabulary and hex-float tensors.
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace corefmt
