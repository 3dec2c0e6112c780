#include "doctest.h"

#include <random>

#include "corefmt/kernels.hpp"

using namespace corefmt;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Equivalence is up to reassociation: FMA and split accumulators change
// rounding but not the exact value beyond a few ulps per term.
void check_close(const std::vector<double>& a, const std::vector<double>& b, std::size_t k) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-13 * (k + 1)));
}

}  // namespace

TEST_CASE("scalar table is always available") {
  CHECK(std::string(kernels::scalar_table().name) == "scalar");
  const auto names = kernels::available();
  CHECK(std::find(names.begin(), names.end(), "scalar") != names.end());
  CHECK(kernels::set_active("scalar"));
  CHECK(std::string(kernels::active().name) == "scalar");
  CHECK_FALSE(kernels::set_active("neon-please"));
  CHECK(std::string(kernels::active().name) == "scalar");
  CHECK(kernels::set_active("auto"));
}

TEST_CASE("scalar reference values") {
  const auto& s = kernels::scalar_table();
  const double a[] = {1, 2, 3};
  const double b[] = {4, 5, 6};
  CHECK(s.dot(a, b, 3) == 32.0);
  double y[] = {1, 1, 1};
  s.axpy(2.0, a, y, 3);
  CHECK(y[2] == 7.0);
  // [1 2; 3 4] * [5 6; 7 8]
  const double A[] = {1, 2, 3, 4}, B[] = {5, 6, 7, 8};
  double C[4] = {};
  s.gemm_nn(2, 2, 2, A, B, C);
  CHECK(C[0] == 19);
  CHECK(C[1] == 22);
  CHECK(C[2] == 43);
  CHECK(C[3] == 50);
  double D[4] = {};
  s.gemm_nt(2, 2, 2, A, B, D);  // A * B^T
  CHECK(D[0] == 17);
  CHECK(D[1] == 23);
  double E[4] = {};
  s.gemm_tn(2, 2, 2, A, B, E);  // A^T * B
  CHECK(E[0] == 26);
  CHECK(E[3] == 44);
}

TEST_CASE("avx2 kernels match scalar reference") {
  const kernels::KernelTable* v = kernels::avx2_table();
  if (v == nullptr || !kernels::cpu_has_avx2()) {
    MESSAGE("AVX2 kernels unavailable; skipping equivalence");
    return;
  }
  const auto& s = kernels::scalar_table();
  std::mt19937_64 rng(5);
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 9u, 16u, 31u, 33u, 100u}) {
    auto a = random_vec(n, rng), b = random_vec(n, rng);
    CHECK(v->dot(a.data(), b.data(), n) == doctest::Approx(s.dot(a.data(), b.data(), n)).epsilon(1e-12));
    auto y1 = random_vec(n, rng);
    auto y2 = y1;
    s.axpy(0.37, a.data(), y1.data(), n);
    v->axpy(0.37, a.data(), y2.data(), n);
    check_close(y1, y2, 1);
  }
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng() % 13, k = 1 + rng() % 21, m = 1 + rng() % 19;
    auto A = random_vec(n * k, rng), B = random_vec(k * m, rng), Bt = random_vec(m * k, rng), Bn = random_vec(n * m, rng);
    auto C0 = random_vec(n * m, rng);
    auto c1 = C0, c2 = C0;
    s.gemm_nn(n, k, m, A.data(), B.data(), c1.data());
    v->gemm_nn(n, k, m, A.data(), B.data(), c2.data());
    check_close(c1, c2, k);
    c1 = c2 = C0;
    s.gemm_nt(n, k, m, A.data(), Bt.data(), c1.data());
    v->gemm_nt(n, k, m, A.data(), Bt.data(), c2.data());
    check_close(c1, c2, k);
    auto D0 = random_vec(k * m, rng);
    auto d1 = D0, d2 = D0;
    s.gemm_tn(n, k, m, A.data(), Bn.data(), d1.data());
    v->gemm_tn(n, k, m, A.data(), Bn.data(), d2.data());
    check_close(d1, d2, n);
  }
}

TEST_CASE("gemm rows are independent of the other rows") {
  std::mt19937_64 rng(9);
  for (const char* name : {"scalar", "avx2"}) {
    if (!kernels::set_active(name)) continue;
    const std::size_t n = 6, k = 13, m = 11;
    auto A = random_vec(n * k, rng), B = random_vec(k * m, rng);
    std::vector<double> full(n * m, 0.0);
    kernels::gemm_nn(n, k, m, A.data(), B.data(), full.data());
    for (std::size_t r = 0; r < n; ++r) {
      std::vector<double> one(m, 0.0);
      kernels::gemm_nn(1, k, m, A.data() + r * k, B.data(), one.data());
      for (std::size_t c = 0; c < m; ++c) CHECK(one[c] == full[r * m + c]);
    }
  }
  kernels::set_active("auto");
}
