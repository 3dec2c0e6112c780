#include "doctest.h"

#include <cmath>

#include "corefmt/autograd.hpp"
#include "test_util.hpp"

using namespace corefmt;
using corefmt::testing::gradient_error;
using corefmt::testing::random_matrix;
using corefmt::testing::weighted_sum;

TEST_CASE("parameter set bookkeeping") {
  ParameterSet p;
  p.add("b", Matrix(2, 3, 1.0));
  p.add("a", Matrix(1, 1, 2.0));
  CHECK(p.scalar_count() == 7);
  CHECK_THROWS(p.add("a", Matrix(1, 1)));
  CHECK_THROWS_AS(p.at("missing"), std::out_of_range);
  auto z = p.zeros_like();
  CHECK(z.at("b").values() == std::vector<double>(6, 0.0));
  CHECK(p.begin()->first == "a");
}

TEST_CASE("elementwise and product gradients") {
  std::mt19937_64 rng(1);
  std::vector<Matrix> in{random_matrix(3, 4, rng), random_matrix(3, 4, rng), random_matrix(4, 5, rng)};
  CHECK(gradient_error(in, [](Graph& g, const std::vector<Var>& v) {
          return weighted_sum(g, matmul(g, relu(g, add(g, v[0], scale(g, v[1], -0.7))), v[2]));
        }) < 1e-7);
  std::vector<Matrix> nt{random_matrix(3, 4, rng), random_matrix(5, 4, rng)};
  CHECK(gradient_error(nt, [](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, matmul_nt(g, v[0], v[1])); }) <
        1e-7);
}

TEST_CASE("linear and layer norm gradients") {
  std::mt19937_64 rng(2);
  std::vector<Matrix> in{random_matrix(4, 6, rng), random_matrix(3, 6, rng), random_matrix(1, 3, rng),
                         random_matrix(1, 3, rng), random_matrix(1, 3, rng)};
  CHECK(gradient_error(in, [](Graph& g, const std::vector<Var>& v) {
          return weighted_sum(g, layer_norm(g, linear(g, v[0], v[1], v[2]), v[3], v[4]));
        }) < 1e-6);
}

TEST_CASE("layer norm output has zero mean and unit variance per row") {
  std::mt19937_64 rng(3);
  Graph g(false);
  Var x = g.constant(random_matrix(5, 8, rng, 3.0));
  const Matrix& y = g.value(layer_norm(g, x, g.constant(Matrix(1, 8, 1.0)), g.constant(Matrix(1, 8, 0.0))));
  for (std::size_t r = 0; r < 5; ++r) {
    double mean = 0, var = 0;
    for (double v : y.row(r)) mean += v / 8;
    for (double v : y.row(r)) var += (v - mean) * (v - mean) / 8;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("gather and outer sum gradients") {
  std::mt19937_64 rng(4);
  std::vector<Matrix> in{random_matrix(5, 3, rng), random_matrix(4, 1, rng), random_matrix(6, 1, rng)};
  CHECK(gradient_error(in, [](Graph& g, const std::vector<Var>& v) {
          Var rows = gather_rows(g, v[0], {4, 0, 0, 2});
          Var o = outer_sum(g, v[1], v[2]);
          Var e = gather_elements(g, o, {{0, 0}, {3, 5}, {3, 5}, {1, 2}});
          return add(g, weighted_sum(g, rows), weighted_sum(g, e));
        }) < 1e-7);
}

TEST_CASE("attention gradients with and without mask") {
  std::mt19937_64 rng(5);
  for (bool causal : {false, true}) {
    std::vector<Matrix> in{random_matrix(4, 6, rng), random_matrix(4, 6, rng), random_matrix(4, 6, rng)};
    CHECK(gradient_error(in, [causal](Graph& g, const std::vector<Var>& v) {
            return weighted_sum(g, attention(g, v[0], v[1], v[2], 2, causal));
          }) < 1e-6);
  }
  std::vector<Matrix> cross{random_matrix(3, 4, rng), random_matrix(5, 4, rng), random_matrix(5, 4, rng)};
  CHECK(gradient_error(cross, [](Graph& g, const std::vector<Var>& v) {
          return weighted_sum(g, attention(g, v[0], v[1], v[2], 1, false));
        }) < 1e-6);
}

TEST_CASE("attention probabilities: rows normalised, causal mask exact zeros") {
  std::mt19937_64 rng(6);
  Graph g(false);
  std::vector<Matrix> probs;
  Var x = g.constant(random_matrix(5, 4, rng));
  attention(g, x, x, x, 2, true, &probs);
  REQUIRE(probs.size() == 2);
  for (const auto& p : probs) {
    for (std::size_t i = 0; i < 5; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < 5; ++j) {
        s += p(i, j);
        if (j > i) CHECK(p(i, j) == 0.0);
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("smoothed nll matches a direct computation") {
  std::mt19937_64 rng(7);
  Matrix logits = random_matrix(3, 5, rng, 2.0);
  const std::vector<int> targets{4, 0, 2};
  const double eps = 0.1;
  double expected = 0;
  for (std::size_t r = 0; r < 3; ++r) {
    double z = 0;
    for (double v : logits.row(r)) z += std::exp(v);
    for (std::size_t c = 0; c < 5; ++c) {
      const double q = (1 - eps) * (static_cast<int>(c) == targets[r]) + eps / 5;
      expected -= q * (logits(r, c) - std::log(z));
    }
  }
  Graph g(false);
  CHECK(scalar(g, smoothed_nll(g, g.constant(logits), targets, eps)) == doctest::Approx(expected).epsilon(1e-12));
  std::vector<Matrix> in{logits};
  CHECK(gradient_error(in, [&](Graph& gg, const std::vector<Var>& v) { return smoothed_nll(gg, v[0], targets, eps); }) <
        1e-7);
}

TEST_CASE("antecedent nll on a hand-computed case") {
  // Row 0 only has epsilon -> contributes 0. Row 1: scores {c0: ln 3}, gold
  // epsilon -> -log(1 / (1 + 3)) = log 4. Row 2: {c0: 0, c1: ln 2}, gold
  // {c0, c1} -> p = 3 / 4.
  Matrix s(3, 3, 0.0);
  s(1, 0) = std::log(3.0);
  s(2, 1) = std::log(2.0);
  s(0, 1) = 100.0;  // ignored (c >= s)
  Graph g(false);
  const double loss = scalar(g, antecedent_nll(g, g.constant(s), {{}, {}, {0, 1}}));
  CHECK(loss == doctest::Approx(std::log(4.0) - std::log(0.75)).epsilon(1e-12));
  std::mt19937_64 rng(8);
  std::vector<Matrix> in{random_matrix(4, 4, rng, 2.0)};
  CHECK(gradient_error(in, [](Graph& gg, const std::vector<Var>& v) {
          return antecedent_nll(gg, v[0], {{}, {0}, {}, {0, 2}});
        }) < 1e-7);
}

TEST_CASE("dropout is the identity without a generator and scales survivors otherwise") {
  std::mt19937_64 rng(9);
  Graph g(false);
  Var x = g.constant(Matrix(10, 10, 1.0));
  CHECK(g.value(dropout(g, x, 0.5, nullptr)).values() == std::vector<double>(100, 1.0));
  const Matrix& y = g.value(dropout(g, x, 0.5, &rng));
  for (double v : y.values()) CHECK((v == 0.0 || v == 2.0));
}

TEST_CASE("backward requires a scalar root") {
  Graph g;
  Matrix m(2, 2, 1.0);
  Var p = g.parameter(m);
  CHECK_THROWS(g.backward(p));
}

TEST_CASE("parameter nodes are shared and gradients accumulate into a parameter set") {
  ParameterSet params;
  params.add("w", Matrix(1, 1, 3.0));
  auto grads = params.zeros_like();
  Graph g;
  Var a = g.parameter(params.at("w"));
  Var b = g.parameter(params.at("w"));
  CHECK(a.id == b.id);
  Var y = matmul(g, a, b);  // w^2
  g.backward(y);
  g.accumulate_gradients(params, grads);
  g.accumulate_gradients(params, grads);
  CHECK(grads.at("w")(0, 0) == 12.0);
}
