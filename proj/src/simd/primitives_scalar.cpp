// Reference flavour: plain loops, sequential accumulation.

#include "oocqr/simd.hpp"

namespace oocqr::simd {
namespace {

void gemm_tn_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                    const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t j = 0; j < n; ++j) {
    const double* bj = b + j * ldb;
    for (std::size_t i = 0; i < k; ++i) {
      const double* ai = a + i * lda;
      double s = 0.0;
      for (std::size_t r = 0; r < m; ++r) s += ai[r] * bj[r];
      c[i + j * ldc] = s;
    }
  }
}

void gemm_nn_sub_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a,
                        std::size_t lda, const double* b, std::size_t ldb, double* c,
                        std::size_t ldc) {
  for (std::size_t j = 0; j < n; ++j) {
    double* cj = c + j * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const double bpj = b[p + j * ldb];
      const double* ap = a + p * lda;
      for (std::size_t i = 0; i < m; ++i) cj[i] -= ap[i] * bpj;
    }
  }
}

constexpr Primitives kScalar{Level::scalar, "scalar", &gemm_tn_scalar, &gemm_nn_sub_scalar};

}  // namespace

const Primitives& scalar_primitives() { return kScalar; }

}  // namespace oocqr::simd
