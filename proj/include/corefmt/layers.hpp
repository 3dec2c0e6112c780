#pragma once

// Post-norm Transformer building blocks shared by the translation model and
// the coreference head. Parameter tensors are looked up by `prefix` + suffix.

#include <random>
#include <string>
#include <vector>

#include "corefmt/autograd.hpp"

namespace corefmt {

// Parameter initialisation: weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
// biases zero, layer-norm gain one.
void init_linear(ParameterSet& params, const std::string& prefix, int out, int in, std::mt19937_64& rng,
                 bool bias = true);
void init_layer_norm(ParameterSet& params, const std::string& prefix, int d);
void init_attention(ParameterSet& params, const std::string& prefix, int d, std::mt19937_64& rng);
void init_encoder_layer(ParameterSet& params, const std::string& prefix, int d, int ffn, std::mt19937_64& rng);
void init_decoder_layer(ParameterSet& params, const std::string& prefix, int d, int ffn, std::mt19937_64& rng);

Var linear(Graph& g, const ParameterSet& params, const std::string& prefix, Var x);

// Multi-head attention with input/output projections.
Var attention_block(Graph& g, const ParameterSet& params, const std::string& prefix, Var queries, Var memory,
                    int heads, bool causal, std::vector<Matrix>* probs = nullptr);

// x -> LN(x + Drop(SelfAttn(x))) -> LN(. + Drop(FFN(.))).
Var encoder_layer(Graph& g, const ParameterSet& params, const std::string& prefix, Var x, int heads,
                  double dropout_p, std::mt19937_64* rng, std::vector<Matrix>* self_probs = nullptr);

// Self-attention (causal or not), cross-attention over `memory`, then FFN;
// each sub-block followed by residual add and layer norm.
Var decoder_layer(Graph& g, const ParameterSet& params, const std::string& prefix, Var x, Var memory, int heads,
                  bool causal, double dropout_p, std::mt19937_64* rng, std::vector<Matrix>* self_probs = nullptr);

// Fixed sinusoidal position table, n x d.
Matrix sinusoidal_positions(std::size_t n, std::size_t d);

}  // namespace corefmt
