#include "corefmt/layers.hpp"

#include <cmath>

namespace corefmt {

void init_linear(ParameterSet& params, const std::string& prefix, int out, int in, std::mt19937_64& rng, bool bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> unif(-bound, bound);
  Matrix w(out, in);
  for (double& x : w.values()) x = unif(rng);
  params.add(prefix + ".weight", std::move(w));
  if (bias) params.add(prefix + ".bias", Matrix(1, out));
}

void init_layer_norm(ParameterSet& params, const std::string& prefix, int d) {
  params.add(prefix + ".gain", Matrix(1, d, 1.0));
  params.add(prefix + ".bias", Matrix(1, d));
}

void init_attention(ParameterSet& params, const std::string& prefix, int d, std::mt19937_64& rng) {
  init_linear(params, prefix + ".q", d, d, rng);
  init_linear(params, prefix + ".k", d, d, rng);
  init_linear(params, prefix + ".v", d, d, rng);
  init_linear(params, prefix + ".out", d, d, rng);
}

void init_encoder_layer(ParameterSet& params, const std::string& prefix, int d, int ffn, std::mt19937_64& rng) {
  init_attention(params, prefix + ".self", d, rng);
  init_layer_norm(params, prefix + ".ln1", d);
  init_linear(params, prefix + ".ffn1", ffn, d, rng);
  init_linear(params, prefix + ".ffn2", d, ffn, rng);
  init_layer_norm(params, prefix + ".ln2", d);
}

void init_decoder_layer(ParameterSet& params, const std::string& prefix, int d, int ffn, std::mt19937_64& rng) {
  init_attention(params, prefix + ".self", d, rng);
  init_layer_norm(params, prefix + ".ln1", d);
  init_attention(params, prefix + ".cross", d, rng);
  init_layer_norm(params, prefix + ".ln2", d);
  init_linear(params, prefix + ".ffn1", ffn, d, rng);
  init_linear(params, prefix + ".ffn2", d, ffn, rng);
  init_layer_norm(params, prefix + ".ln3", d);
}

Var linear(Graph& g, const ParameterSet& params, const std::string& prefix, Var x) {
  return linear(g, x, g.parameter(params.at(prefix + ".weight")), g.parameter(params.at(prefix + ".bias")));
}

namespace {

Var norm(Graph& g, const ParameterSet& params, const std::string& prefix, Var x) {
  return layer_norm(g, x, g.parameter(params.at(prefix + ".gain")), g.parameter(params.at(prefix + ".bias")));
}

Var feed_forward(Graph& g, const ParameterSet& params, const std::string& prefix, Var x, double p,
                 std::mt19937_64* rng) {
  Var h = relu(g, linear(g, params, prefix + ".ffn1", x));
  h = dropout(g, h, p, rng);
  return linear(g, params, prefix + ".ffn2", h);
}

}  // namespace

Var attention_block(Graph& g, const ParameterSet& params, const std::string& prefix, Var queries, Var memory,
                    int heads, bool causal, std::vector<Matrix>* probs) {
  Var q = linear(g, params, prefix + ".q", queries);
  Var k = linear(g, params, prefix + ".k", memory);
  Var v = linear(g, params, prefix + ".v", memory);
  Var ctx = attention(g, q, k, v, heads, causal, probs);
  return linear(g, params, prefix + ".out", ctx);
}

Var encoder_layer(Graph& g, const ParameterSet& params, const std::string& prefix, Var x, int heads,
                  double dropout_p, std::mt19937_64* rng, std::vector<Matrix>* self_probs) {
  Var a = attention_block(g, params, prefix + ".self", x, x, heads, false, self_probs);
  Var h = norm(g, params, prefix + ".ln1", add(g, x, dropout(g, a, dropout_p, rng)));
  Var f = feed_forward(g, params, prefix, h, dropout_p, rng);
  return norm(g, params, prefix + ".ln2", add(g, h, dropout(g, f, dropout_p, rng)));
}

Var decoder_layer(Graph& g, const ParameterSet& params, const std::string& prefix, Var x, Var memory, int heads,
                  bool causal, double dropout_p, std::mt19937_64* rng, std::vector<Matrix>* self_probs) {
  Var a = attention_block(g, params, prefix + ".self", x, x, heads, causal, self_probs);
  Var h = norm(g, params, prefix + ".ln1", add(g, x, dropout(g, a, dropout_p, rng)));
  Var c = attention_block(g, params, prefix + ".cross", h, memory, heads, false);
  h = norm(g, params, prefix + ".ln2", add(g, h, dropout(g, c, dropout_p, rng)));
  Var f = feed_forward(g, params, prefix, h, dropout_p, rng);
  return norm(g, params, prefix + ".ln3", add(g, h, dropout(g, f, dropout_p, rng)));
}

Matrix sinusoidal_positions(std::size_t n, std::size_t d) {
  Matrix pe(n, d);
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t i = 0; i < d; ++i) {
      const double expo = static_cast<double>(2 * (i / 2)) / static_cast<double>(d);
      const double angle = static_cast<double>(pos) / std::pow(10000.0, expo);
      pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

}  // namespace corefmt
