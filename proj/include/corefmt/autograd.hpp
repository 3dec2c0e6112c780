#pragma once

// A small reverse-mode tape over dense double matrices.
//
// A Graph owns every intermediate produced while evaluating one loss. Ops are
// free functions that read input values, push a node holding the result, and
// (when gradients are being recorded) a closure that accumulates input
// gradients during backward().

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "corefmt/matrix.hpp"

namespace corefmt {

// Named parameter tensors. Iteration order is lexicographic by name, which
// fixes the order of every reduction over parameters.
class ParameterSet {
 public:
  Matrix& add(const std::string& name, Matrix init);
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  std::size_t scalar_count() const;
  // Same names and shapes, all zeros.
  ParameterSet zeros_like() const;
  void fill(double v);

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::map<std::string, Matrix> params_;
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int self)>;

  explicit Graph(bool record_gradients = true) : record_(record_gradients) {}

  Var constant(Matrix value);
  // Leaf bound to a parameter tensor, identified by address. Repeated calls
  // with the same tensor return the same node.
  Var parameter(const Matrix& p);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  const Matrix& value(int id) const { return nodes_[id].value; }
  Matrix& grad(int id);
  Matrix& grad(Var v) { return grad(v.id); }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  bool recording() const { return record_; }

  // Seeds d(root)/d(root) = 1 for a 1x1 root and propagates to every node.
  void backward(Var root);
  // Adds the gradient of each parameter leaf into the same-named tensor of
  // `grads` (which must mirror `params`).
  void accumulate_gradients(const ParameterSet& params, ParameterSet& grads);

  // Used by op implementations. `fn` is dropped when no input needs a gradient.
  Var push(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  std::map<const Matrix*, int> param_nodes_;
  bool record_;
};

double scalar(const Graph& g, Var v);

// Elementwise and shape ops.
Var add(Graph& g, Var a, Var b);
Var scale(Graph& g, Var a, double s);
Var relu(Graph& g, Var a);
// Inverted dropout; identity when p == 0 or rng is null.
Var dropout(Graph& g, Var a, double p, std::mt19937_64* rng);
Var gather_rows(Graph& g, Var x, const std::vector<int>& rows);
// Column vector of x(r, c) for each (r, c).
Var gather_elements(Graph& g, Var x, const std::vector<std::pair<int, int>>& at);
// out(i, j) = a(i, 0) + b(j, 0).
Var outer_sum(Graph& g, Var a, Var b);

// Products.
Var matmul(Graph& g, Var a, Var b);     // a * b
Var matmul_nt(Graph& g, Var a, Var b);  // a * b^T
// x * W^T + b, W stored out x in, b stored 1 x out.
Var linear(Graph& g, Var x, Var w, Var b);
Var layer_norm(Graph& g, Var x, Var gamma, Var beta, double eps = 1e-5);

// Scaled dot-product attention over column blocks of q/k/v (one per head).
// q: n x d, k and v: t x d. With `causal`, query i only sees keys j <= i.
// When `probs` is non-null it receives one n x t probability matrix per head.
Var attention(Graph& g, Var q, Var k, Var v, int heads, bool causal,
              std::vector<Matrix>* probs = nullptr);

// Sum over rows of label-smoothed cross entropy against `targets`:
// -sum_v q_v log softmax(logits)_v with q = (1 - eps) onehot + eps / V.
Var smoothed_nll(Graph& g, Var logits, const std::vector<int>& targets, double eps);

// Marginal antecedent likelihood over a K x K score matrix (row = mention,
// column = candidate antecedent). Row s competes over {epsilon (score 0)} and
// columns c < s. gold[s] lists the gold-consistent antecedent columns; an
// empty list means epsilon. Returns -sum_s log sum_{c in gold[s]} p(c | s).
Var antecedent_nll(Graph& g, Var scores, const std::vector<std::vector<int>>& gold);

}  // namespace corefmt
