#pragma once

// Dense double-precision inner loops used by the autograd tape.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The active table is chosen once at startup from CPUID and
// can be overridden with COREFMT_KERNELS=scalar|avx2 or set_active().
//
// Row independence: every gemm writes output row i using only row i of the
// left operand, with the same reduction order for every row. The decoder's
// bit-exact causality property relies on this.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace corefmt::kernels {

struct KernelTable {
  const char* name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // C[n x m] += A[n x k] * B[k x m]
  void (*gemm_nn)(std::size_t n, std::size_t k, std::size_t m, const double* a,
                  const double* b, double* c);
  // C[n x m] += A[n x k] * B[m x k]^T
  void (*gemm_nt)(std::size_t n, std::size_t k, std::size_t m, const double* a,
                  const double* b, double* c);
  // C[k x m] += A[n x k]^T * B[n x m]
  void (*gemm_tn)(std::size_t n, std::size_t k, std::size_t m, const double* a,
                  const double* b, double* c);
};

const KernelTable& scalar_table();
// nullptr when the binary was built without AVX2 support.
const KernelTable* avx2_table();

bool cpu_has_avx2();

const KernelTable& active();
// Accepts "scalar", "avx2" or "auto". Returns false if the request cannot be
// honoured on this machine; the active table is unchanged in that case.
bool set_active(std::string_view name);

std::vector<std::string> available();

inline double dot(const double* a, const double* b, std::size_t n) {
  return active().dot(a, b, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline void gemm_nn(std::size_t n, std::size_t k, std::size_t m, const double* a,
                    const double* b, double* c) {
  active().gemm_nn(n, k, m, a, b, c);
}
inline void gemm_nt(std::size_t n, std::size_t k, std::size_t m, const double* a,
                    const double* b, double* c) {
  active().gemm_nt(n, k, m, a, b, c);
}
inline void gemm_tn(std::size_t n, std::size_t k, std::size_t m, const double* a,
                    const double* b, double* c) {
  active().gemm_tn(n, k, m, a, b, c);
}

}  // namespace corefmt::kernels
