#include "corefmt/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "corefmt/kernels.hpp"

namespace corefmt {

Matrix& ParameterSet::add(const std::string& name, Matrix init) {
  auto [it, inserted] = params_.try_emplace(name, std::move(init));
  if (!inserted) throw std::invalid_argument("duplicate parameter: " + name);
  return it->second;
}

Matrix& ParameterSet::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

const Matrix& ParameterSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.size();
  return n;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& [name, p] : params_) out.add(name, Matrix(p.rows(), p.cols()));
  return out;
}

void ParameterSet::fill(double v) {
  for (auto& [name, p] : params_) p.fill(v);
}

Var Graph::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::parameter(const Matrix& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{it->second};
  Node n;
  n.value = p;
  n.requires_grad = record_;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(&p, id);
  return Var{id};
}

Matrix& Graph::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Graph::push(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (Var v : inputs) n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Graph::backward(Var root) {
  if (!record_) throw std::logic_error("backward() on a graph that does not record gradients");
  const Matrix& rv = nodes_[root.id].value;
  if (rv.rows() != 1 || rv.cols() != 1) throw std::invalid_argument("backward() needs a 1x1 root");
  grad(root.id)(0, 0) += 1.0;
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.empty() || !n.requires_grad) continue;
    if (n.backward) n.backward(*this, id);
  }
}

void Graph::accumulate_gradients(const ParameterSet& params, ParameterSet& grads) {
  for (const auto& [name, p] : params) {
    auto it = param_nodes_.find(&p);
    if (it == param_nodes_.end()) continue;
    const Matrix& g = nodes_[it->second].grad;
    if (g.empty()) continue;
    Matrix& dst = grads.at(name);
    kernels::axpy(1.0, g.data(), dst.data(), g.size());
  }
}

double scalar(const Graph& g, Var v) {
  const Matrix& m = g.value(v);
  if (m.rows() != 1 || m.cols() != 1) throw std::invalid_argument("scalar() on a non 1x1 value");
  return m(0, 0);
}

namespace {

void check_same(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

// Copy of the column block [c0, c0 + w) of m.
Matrix column_block(const Matrix& m, std::size_t c0, std::size_t w) {
  Matrix out(m.rows(), w);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* src = m.data() + r * m.cols() + c0;
    std::copy(src, src + w, out.data() + r * w);
  }
  return out;
}

void add_column_block(Matrix& m, std::size_t c0, const Matrix& block) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    kernels::axpy(1.0, block.data() + r * block.cols(), m.data() + r * m.cols() + c0,
                  block.cols());
  }
}

}  // namespace

Var add(Graph& g, Var a, Var b) {
  const Matrix& av = g.value(a);
  const Matrix& bv = g.value(b);
  check_same(av, bv, "add");
  Matrix out = av;
  kernels::axpy(1.0, bv.data(), out.data(), out.size());
  return g.push(std::move(out), {a, b}, [a, b](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    if (g.requires_grad(a)) kernels::axpy(1.0, dy.data(), g.grad(a).data(), dy.size());
    if (g.requires_grad(b)) kernels::axpy(1.0, dy.data(), g.grad(b).data(), dy.size());
  });
}

Var scale(Graph& g, Var a, double s) {
  Matrix out = g.value(a);
  for (double& x : out.values()) x *= s;
  return g.push(std::move(out), {a}, [a, s](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    kernels::axpy(s, dy.data(), g.grad(a).data(), dy.size());
  });
}

Var relu(Graph& g, Var a) {
  Matrix out = g.value(a);
  for (double& x : out.values()) x = x > 0.0 ? x : 0.0;
  return g.push(std::move(out), {a}, [a](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    const Matrix& x = g.value(a);
    Matrix& dx = g.grad(a);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      if (x.data()[i] > 0.0) dx.data()[i] += dy.data()[i];
    }
  });
}

Var dropout(Graph& g, Var a, double p, std::mt19937_64* rng) {
  if (p <= 0.0 || rng == nullptr) return a;
  if (p >= 1.0) throw std::invalid_argument("dropout probability must be < 1");
  const Matrix& x = g.value(a);
  auto mask = std::make_shared<std::vector<double>>(x.size());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double keep = 1.0 / (1.0 - p);
  for (double& m : *mask) m = unif(*rng) < p ? 0.0 : keep;
  Matrix out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= (*mask)[i];
  return g.push(std::move(out), {a}, [a, mask](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    Matrix& dx = g.grad(a);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.data()[i] += dy.data()[i] * (*mask)[i];
  });
}

Var gather_rows(Graph& g, Var x, const std::vector<int>& rows) {
  const Matrix& xv = g.value(x);
  Matrix out(rows.size(), xv.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || static_cast<std::size_t>(rows[i]) >= xv.rows()) {
      throw std::out_of_range("gather_rows: index out of range");
    }
    auto src = xv.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return g.push(std::move(out), {x}, [x, rows](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    Matrix& dx = g.grad(x);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      kernels::axpy(1.0, dy.row(i).data(), dx.row(rows[i]).data(), dy.cols());
    }
  });
}

Var gather_elements(Graph& g, Var x, const std::vector<std::pair<int, int>>& at) {
  const Matrix& xv = g.value(x);
  Matrix out(at.size(), 1);
  for (std::size_t i = 0; i < at.size(); ++i) out(i, 0) = xv(at[i].first, at[i].second);
  return g.push(std::move(out), {x}, [x, at](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    Matrix& dx = g.grad(x);
    for (std::size_t i = 0; i < at.size(); ++i) dx(at[i].first, at[i].second) += dy(i, 0);
  });
}

Var outer_sum(Graph& g, Var a, Var b) {
  const Matrix& av = g.value(a);
  const Matrix& bv = g.value(b);
  if (av.cols() != 1 || bv.cols() != 1) throw std::invalid_argument("outer_sum: column vectors expected");
  Matrix out(av.rows(), bv.rows());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    for (std::size_t j = 0; j < bv.rows(); ++j) out(i, j) = av(i, 0) + bv(j, 0);
  }
  return g.push(std::move(out), {a, b}, [a, b](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    if (g.requires_grad(a)) {
      Matrix& da = g.grad(a);
      for (std::size_t i = 0; i < dy.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < dy.cols(); ++j) s += dy(i, j);
        da(i, 0) += s;
      }
    }
    if (g.requires_grad(b)) {
      Matrix& db = g.grad(b);
      for (std::size_t i = 0; i < dy.rows(); ++i) {
        for (std::size_t j = 0; j < dy.cols(); ++j) db(j, 0) += dy(i, j);
      }
    }
  });
}

Var matmul(Graph& g, Var a, Var b) {
  const Matrix& av = g.value(a);
  const Matrix& bv = g.value(b);
  if (av.cols() != bv.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
  Matrix out(n, m);
  kernels::gemm_nn(n, k, m, av.data(), bv.data(), out.data());
  return g.push(std::move(out), {a, b}, [a, b, n, k, m](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    if (g.requires_grad(a)) kernels::gemm_nt(n, m, k, dy.data(), g.value(b).data(), g.grad(a).data());
    if (g.requires_grad(b)) kernels::gemm_tn(n, k, m, g.value(a).data(), dy.data(), g.grad(b).data());
  });
}

Var matmul_nt(Graph& g, Var a, Var b) {
  const Matrix& av = g.value(a);
  const Matrix& bv = g.value(b);
  if (av.cols() != bv.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  const std::size_t n = av.rows(), k = av.cols(), m = bv.rows();
  Matrix out(n, m);
  kernels::gemm_nt(n, k, m, av.data(), bv.data(), out.data());
  return g.push(std::move(out), {a, b}, [a, b, n, k, m](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    if (g.requires_grad(a)) kernels::gemm_nn(n, m, k, dy.data(), g.value(b).data(), g.grad(a).data());
    if (g.requires_grad(b)) kernels::gemm_tn(n, m, k, dy.data(), g.value(a).data(), g.grad(b).data());
  });
}

Var linear(Graph& g, Var x, Var w, Var b) {
  const Matrix& xv = g.value(x);
  const Matrix& wv = g.value(w);
  const Matrix& bv = g.value(b);
  if (xv.cols() != wv.cols() || bv.rows() != 1 || bv.cols() != wv.rows()) {
    throw std::invalid_argument("linear: shape mismatch");
  }
  const std::size_t n = xv.rows(), in = xv.cols(), out_dim = wv.rows();
  Matrix out(n, out_dim);
  for (std::size_t r = 0; r < n; ++r) std::copy(bv.data(), bv.data() + out_dim, out.row(r).begin());
  kernels::gemm_nt(n, in, out_dim, xv.data(), wv.data(), out.data());
  return g.push(std::move(out), {x, w, b}, [x, w, b, n, in, out_dim](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    if (g.requires_grad(x)) {
      kernels::gemm_nn(n, out_dim, in, dy.data(), g.value(w).data(), g.grad(x).data());
    }
    if (g.requires_grad(w)) {
      kernels::gemm_tn(n, out_dim, in, dy.data(), g.value(x).data(), g.grad(w).data());
    }
    if (g.requires_grad(b)) {
      Matrix& db = g.grad(b);
      for (std::size_t r = 0; r < n; ++r) kernels::axpy(1.0, dy.row(r).data(), db.data(), out_dim);
    }
  });
}

Var layer_norm(Graph& g, Var x, Var gamma, Var beta, double eps) {
  const Matrix& xv = g.value(x);
  const Matrix& gv = g.value(gamma);
  const Matrix& bv = g.value(beta);
  const std::size_t n = xv.rows(), d = xv.cols();
  if (gv.cols() != d || bv.cols() != d) throw std::invalid_argument("layer_norm: shape mismatch");
  auto xhat = std::make_shared<Matrix>(n, d);
  auto inv_std = std::make_shared<std::vector<double>>(n);
  Matrix out(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = xv.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < d; ++c) {
      const double h = (row[c] - mean) * is;
      (*xhat)(r, c) = h;
      out(r, c) = gv(0, c) * h + bv(0, c);
    }
  }
  return g.push(std::move(out), {x, gamma, beta},
                [x, gamma, beta, xhat, inv_std, n, d](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    const Matrix& gv = g.value(gamma);
    if (g.requires_grad(gamma) || g.requires_grad(beta)) {
      Matrix& dg = g.grad(gamma);
      Matrix& db = g.grad(beta);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
          dg(0, c) += dy(r, c) * (*xhat)(r, c);
          db(0, c) += dy(r, c);
        }
      }
    }
    if (g.requires_grad(x)) {
      Matrix& dx = g.grad(x);
      std::vector<double> dh(d);
      for (std::size_t r = 0; r < n; ++r) {
        double mean_dh = 0.0, mean_dh_h = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          dh[c] = dy(r, c) * gv(0, c);
          mean_dh += dh[c];
          mean_dh_h += dh[c] * (*xhat)(r, c);
        }
        mean_dh /= static_cast<double>(d);
        mean_dh_h /= static_cast<double>(d);
        const double is = (*inv_std)[r];
        for (std::size_t c = 0; c < d; ++c) {
          dx(r, c) += is * (dh[c] - mean_dh - (*xhat)(r, c) * mean_dh_h);
        }
      }
    }
  });
}

Var attention(Graph& g, Var q, Var k, Var v, int heads, bool causal, std::vector<Matrix>* probs) {
  const Matrix& qv = g.value(q);
  const Matrix& kv = g.value(k);
  const Matrix& vv = g.value(v);
  const std::size_t n = qv.rows(), t = kv.rows(), d = qv.cols();
  if (kv.cols() != d || vv.cols() != d || vv.rows() != t) throw std::invalid_argument("attention: shape mismatch");
  if (heads <= 0 || d % static_cast<std::size_t>(heads) != 0) throw std::invalid_argument("attention: bad head count");
  if (causal && n != t) throw std::invalid_argument("attention: causal mask needs square scores");
  const std::size_t dk = d / static_cast<std::size_t>(heads);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));

  auto head_probs = std::make_shared<std::vector<Matrix>>();
  head_probs->reserve(heads);
  Matrix out(n, d);
  for (int h = 0; h < heads; ++h) {
    const std::size_t c0 = static_cast<std::size_t>(h) * dk;
    Matrix qh = column_block(qv, c0, dk);
    Matrix kh = column_block(kv, c0, dk);
    Matrix vh = column_block(vv, c0, dk);
    Matrix p(n, t);
    kernels::gemm_nt(n, dk, t, qh.data(), kh.data(), p.data());
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t visible = causal ? i + 1 : t;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < visible; ++j) mx = std::max(mx, p(i, j) * inv_sqrt);
      double z = 0.0;
      for (std::size_t j = 0; j < visible; ++j) {
        const double e = std::exp(p(i, j) * inv_sqrt - mx);
        p(i, j) = e;
        z += e;
      }
      for (std::size_t j = 0; j < visible; ++j) p(i, j) /= z;
      for (std::size_t j = visible; j < t; ++j) p(i, j) = 0.0;
    }
    Matrix oh(n, dk);
    kernels::gemm_nn(n, t, dk, p.data(), vh.data(), oh.data());
    add_column_block(out, c0, oh);
    head_probs->push_back(std::move(p));
  }
  if (probs != nullptr) *probs = *head_probs;
  return g.push(std::move(out), {q, k, v},
                [q, k, v, heads, n, t, dk, inv_sqrt, head_probs, causal](Graph& g, int self) {
    const Matrix& dy = g.grad(self);
    const bool need_q = g.requires_grad(q), need_k = g.requires_grad(k), need_v = g.requires_grad(v);
    for (int h = 0; h < heads; ++h) {
      const std::size_t c0 = static_cast<std::size_t>(h) * dk;
      const Matrix& p = (*head_probs)[h];
      Matrix doh = column_block(dy, c0, dk);
      Matrix vh = column_block(g.value(v), c0, dk);
      if (need_v) {
        Matrix dvh(t, dk);
        kernels::gemm_tn(n, t, dk, p.data(), doh.data(), dvh.data());
        add_column_block(g.grad(v), c0, dvh);
      }
      if (!need_q && !need_k) continue;
      Matrix ds(n, t);
      kernels::gemm_nt(n, dk, t, doh.data(), vh.data(), ds.data());
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t visible = causal ? i + 1 : t;
        double dot = 0.0;
        for (std::size_t j = 0; j < visible; ++j) dot += ds(i, j) * p(i, j);
        for (std::size_t j = 0; j < visible; ++j) ds(i, j) = p(i, j) * (ds(i, j) - dot) * inv_sqrt;
        for (std::size_t j = visible; j < t; ++j) ds(i, j) = 0.0;
      }
      if (need_q) {
        Matrix kh = column_block(g.value(k), c0, dk);
        Matrix dqh(n, dk);
        kernels::gemm_nn(n, t, dk, ds.data(), kh.data(), dqh.data());
        add_column_block(g.grad(q), c0, dqh);
      }
      if (need_k) {
        Matrix qh = column_block(g.value(q), c0, dk);
        Matrix dkh(t, dk);
        kernels::gemm_tn(n, t, dk, ds.data(), qh.data(), dkh.data());
        add_column_block(g.grad(k), c0, dkh);
      }
    }
  });
}

Var smoothed_nll(Graph& g, Var logits, const std::vector<int>& targets, double eps) {
  const Matrix& lv = g.value(logits);
  const std::size_t n = lv.rows(), vocab = lv.cols();
  if (targets.size() != n) throw std::invalid_argument("smoothed_nll: target count mismatch");
  auto probs = std::make_shared<Matrix>(n, vocab);
  double loss = 0.0;
  const double uniform = eps / static_cast<double>(vocab);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = lv.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double x : row) z += std::exp(x - mx);
    const double lse = mx + std::log(z);
    double sum_neg_logp = 0.0;
    for (std::size_t c = 0; c < vocab; ++c) {
      const double lp = row[c] - lse;
      (*probs)(r, c) = std::exp(lp);
      sum_neg_logp -= lp;
    }
    const int y = targets[r];
    if (y < 0 || static_cast<std::size_t>(y) >= vocab) throw std::out_of_range("smoothed_nll: target out of range");
    loss += (1.0 - eps) * (lse - row[y]) + uniform * sum_neg_logp;
  }
  return g.push(Matrix(1, 1, loss), {logits}, [logits, probs, targets, eps, uniform](Graph& g, int self) {
    const double dl = g.grad(self)(0, 0);
    Matrix& dx = g.grad(logits);
    for (std::size_t r = 0; r < probs->rows(); ++r) {
      for (std::size_t c = 0; c < probs->cols(); ++c) {
        const double q = uniform + (static_cast<int>(c) == targets[r] ? 1.0 - eps : 0.0);
        dx(r, c) += dl * ((*probs)(r, c) - q);
      }
    }
  });
}

Var antecedent_nll(Graph& g, Var scores, const std::vector<std::vector<int>>& gold) {
  const Matrix& sv = g.value(scores);
  const std::size_t k = sv.rows();
  if (sv.cols() != k || gold.size() != k) throw std::invalid_argument("antecedent_nll: shape mismatch");
  // Per row: softmax over all candidates and over the gold subset. Column k
  // stands for epsilon.
  auto p_all = std::make_shared<Matrix>(k, k + 1);
  auto p_gold = std::make_shared<Matrix>(k, k + 1);
  double loss = 0.0;
  for (std::size_t s = 0; s < k; ++s) {
    double mx = 0.0;  // epsilon score
    for (std::size_t c = 0; c < s; ++c) mx = std::max(mx, sv(s, c));
    double z = std::exp(-mx);
    for (std::size_t c = 0; c < s; ++c) z += std::exp(sv(s, c) - mx);
    const double lse_all = mx + std::log(z);
    for (std::size_t c = 0; c < s; ++c) (*p_all)(s, c) = std::exp(sv(s, c) - lse_all);
    (*p_all)(s, k) = std::exp(-lse_all);

    double lse_gold;
    if (gold[s].empty()) {
      lse_gold = 0.0;
      (*p_gold)(s, k) = 1.0;
    } else {
      double gm = -std::numeric_limits<double>::infinity();
      for (int c : gold[s]) {
        if (c < 0 || static_cast<std::size_t>(c) >= s) throw std::invalid_argument("antecedent_nll: gold antecedent not left of mention");
        gm = std::max(gm, sv(s, c));
      }
      double gz = 0.0;
      for (int c : gold[s]) gz += std::exp(sv(s, c) - gm);
      lse_gold = gm + std::log(gz);
      for (int c : gold[s]) (*p_gold)(s, c) = std::exp(sv(s, c) - lse_gold);
    }
    loss += lse_all - lse_gold;
  }
  return g.push(Matrix(1, 1, loss), {scores}, [scores, p_all, p_gold, k](Graph& g, int self) {
    const double dl = g.grad(self)(0, 0);
    Matrix& ds = g.grad(scores);
    for (std::size_t s = 0; s < k; ++s) {
      for (std::size_t c = 0; c < s; ++c) ds(s, c) += dl * ((*p_all)(s, c) - (*p_gold)(s, c));
    }
  });
}

}  // namespace corefmt
