// AVX2 + FMA flavour. Only this translation unit is compiled with -mavx2 -mfma.
//
// Per-element arithmetic is fixed regardless of which micro-tile or remainder
// path computes an element:
//   gemm_nn_sub: c = fnmadd(a_p, b_p, c) for p = 0..k-1, fused (vector lanes
//                and scalar tails both use a single rounding per step)
//   gemm_tn:     4-lane fused accumulation over full row quads, a fixed
//                horizontal reduction, then fused tail rows in order

#include "oocqr/simd.hpp"

#if defined(OOCQR_HAVE_AVX2) && defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>

namespace oocqr::simd {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d s = _mm_add_pd(lo, hi);  // <l0+l2, l1+l3>
  return _mm_cvtsd_f64(s) + _mm_cvtsd_f64(_mm_unpackhi_pd(s, s));
}

inline double dot_one(std::size_t m, const double* x, const double* y) {
  const std::size_t m4 = m & ~std::size_t{3};
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t r = 0; r < m4; r += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + r), _mm256_loadu_pd(y + r), acc);
  double s = hsum(acc);
  for (std::size_t r = m4; r < m; ++r) s = std::fma(x[r], y[r], s);
  return s;
}

void gemm_tn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                  const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  const std::size_t m4 = m & ~std::size_t{3};
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const double* b0 = b + (j + 0) * ldb;
    const double* b1 = b + (j + 1) * ldb;
    const double* b2 = b + (j + 2) * ldb;
    const double* b3 = b + (j + 3) * ldb;
    std::size_t i = 0;
    for (; i + 2 <= k; i += 2) {
      const double* a0 = a + (i + 0) * lda;
      const double* a1 = a + (i + 1) * lda;
      __m256d s00 = _mm256_setzero_pd(), s01 = _mm256_setzero_pd();
      __m256d s02 = _mm256_setzero_pd(), s03 = _mm256_setzero_pd();
      __m256d s10 = _mm256_setzero_pd(), s11 = _mm256_setzero_pd();
      __m256d s12 = _mm256_setzero_pd(), s13 = _mm256_setzero_pd();
      for (std::size_t r = 0; r < m4; r += 4) {
        __m256d x0 = _mm256_loadu_pd(a0 + r);
        __m256d x1 = _mm256_loadu_pd(a1 + r);
        __m256d y = _mm256_loadu_pd(b0 + r);
        s00 = _mm256_fmadd_pd(x0, y, s00);
        s10 = _mm256_fmadd_pd(x1, y, s10);
        y = _mm256_loadu_pd(b1 + r);
        s01 = _mm256_fmadd_pd(x0, y, s01);
        s11 = _mm256_fmadd_pd(x1, y, s11);
        y = _mm256_loadu_pd(b2 + r);
        s02 = _mm256_fmadd_pd(x0, y, s02);
        s12 = _mm256_fmadd_pd(x1, y, s12);
        y = _mm256_loadu_pd(b3 + r);
        s03 = _mm256_fmadd_pd(x0, y, s03);
        s13 = _mm256_fmadd_pd(x1, y, s13);
      }
      double t[2][4] = {{hsum(s00), hsum(s01), hsum(s02), hsum(s03)},
                        {hsum(s10), hsum(s11), hsum(s12), hsum(s13)}};
      const double* bs[4] = {b0, b1, b2, b3};
      const double* as[2] = {a0, a1};
      for (int ii = 0; ii < 2; ++ii)
        for (int jj = 0; jj < 4; ++jj) {
          double s = t[ii][jj];
          for (std::size_t r = m4; r < m; ++r) s = std::fma(as[ii][r], bs[jj][r], s);
          c[(i + ii) + (j + jj) * ldc] = s;
        }
    }
    for (; i < k; ++i)
      for (std::size_t jj = 0; jj < 4; ++jj)
        c[i + (j + jj) * ldc] = dot_one(m, a + i * lda, b + (j + jj) * ldb);
  }
  for (; j < n; ++j)
    for (std::size_t i = 0; i < k; ++i) c[i + j * ldc] = dot_one(m, a + i * lda, b + j * ldb);
}

// Rows [i0, m) of one output column, scalar fused tail.
inline void sub_column_tail(std::size_t i0, std::size_t m, std::size_t k, const double* a,
                            std::size_t lda, const double* bj, double* cj) {
  for (std::size_t i = i0; i < m; ++i) {
    double s = cj[i];
    for (std::size_t p = 0; p < k; ++p) s = std::fma(-a[i + p * lda], bj[p], s);
    cj[i] = s;
  }
}

void gemm_nn_sub_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                      std::size_t lda, const double* b, std::size_t ldb, double* c,
                      std::size_t ldc) {
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const double* bj0 = b + (j + 0) * ldb;
    const double* bj1 = b + (j + 1) * ldb;
    const double* bj2 = b + (j + 2) * ldb;
    const double* bj3 = b + (j + 3) * ldb;
    double* c0 = c + (j + 0) * ldc;
    double* c1 = c + (j + 1) * ldc;
    double* c2 = c + (j + 2) * ldc;
    double* c3 = c + (j + 3) * ldc;
    std::size_t i = 0;
    for (; i + 8 <= m; i += 8) {
      __m256d c00 = _mm256_loadu_pd(c0 + i), c01 = _mm256_loadu_pd(c0 + i + 4);
      __m256d c10 = _mm256_loadu_pd(c1 + i), c11 = _mm256_loadu_pd(c1 + i + 4);
      __m256d c20 = _mm256_loadu_pd(c2 + i), c21 = _mm256_loadu_pd(c2 + i + 4);
      __m256d c30 = _mm256_loadu_pd(c3 + i), c31 = _mm256_loadu_pd(c3 + i + 4);
      const double* ap = a + i;
      for (std::size_t p = 0; p < k; ++p, ap += lda) {
        __m256d x0 = _mm256_loadu_pd(ap);
        __m256d x1 = _mm256_loadu_pd(ap + 4);
        __m256d y = _mm256_broadcast_sd(bj0 + p);
        c00 = _mm256_fnmadd_pd(x0, y, c00);
        c01 = _mm256_fnmadd_pd(x1, y, c01);
        y = _mm256_broadcast_sd(bj1 + p);
        c10 = _mm256_fnmadd_pd(x0, y, c10);
        c11 = _mm256_fnmadd_pd(x1, y, c11);
        y = _mm256_broadcast_sd(bj2 + p);
        c20 = _mm256_fnmadd_pd(x0, y, c20);
        c21 = _mm256_fnmadd_pd(x1, y, c21);
        y = _mm256_broadcast_sd(bj3 + p);
        c30 = _mm256_fnmadd_pd(x0, y, c30);
        c31 = _mm256_fnmadd_pd(x1, y, c31);
      }
      _mm256_storeu_pd(c0 + i, c00);
      _mm256_storeu_pd(c0 + i + 4, c01);
      _mm256_storeu_pd(c1 + i, c10);
      _mm256_storeu_pd(c1 + i + 4, c11);
      _mm256_storeu_pd(c2 + i, c20);
      _mm256_storeu_pd(c2 + i + 4, c21);
      _mm256_storeu_pd(c3 + i, c30);
      _mm256_storeu_pd(c3 + i + 4, c31);
    }
    for (; i + 4 <= m; i += 4) {
      __m256d c0v = _mm256_loadu_pd(c0 + i), c1v = _mm256_loadu_pd(c1 + i);
      __m256d c2v = _mm256_loadu_pd(c2 + i), c3v = _mm256_loadu_pd(c3 + i);
      const double* ap = a + i;
      for (std::size_t p = 0; p < k; ++p, ap += lda) {
        __m256d x = _mm256_loadu_pd(ap);
        c0v = _mm256_fnmadd_pd(x, _mm256_broadcast_sd(bj0 + p), c0v);
        c1v = _mm256_fnmadd_pd(x, _mm256_broadcast_sd(bj1 + p), c1v);
        c2v = _mm256_fnmadd_pd(x, _mm256_broadcast_sd(bj2 + p), c2v);
        c3v = _mm256_fnmadd_pd(x, _mm256_broadcast_sd(bj3 + p), c3v);
      }
      _mm256_storeu_pd(c0 + i, c0v);
      _mm256_storeu_pd(c1 + i, c1v);
      _mm256_storeu_pd(c2 + i, c2v);
      _mm256_storeu_pd(c3 + i, c3v);
    }
    sub_column_tail(i, m, k, a, lda, bj0, c0);
    sub_column_tail(i, m, k, a, lda, bj1, c1);
    sub_column_tail(i, m, k, a, lda, bj2, c2);
    sub_column_tail(i, m, k, a, lda, bj3, c3);
  }
  for (; j < n; ++j) {
    const double* bj = b + j * ldb;
    double* cj = c + j * ldc;
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
      __m256d cv = _mm256_loadu_pd(cj + i);
      const double* ap = a + i;
      for (std::size_t p = 0; p < k; ++p, ap += lda)
        cv = _mm256_fnmadd_pd(_mm256_loadu_pd(ap), _mm256_broadcast_sd(bj + p), cv);
      _mm256_storeu_pd(cj + i, cv);
    }
    sub_column_tail(i, m, k, a, lda, bj, cj);
  }
}

constexpr Primitives kAvx2{Level::avx2, "avx2", &gemm_tn_avx2, &gemm_nn_sub_avx2};

}  // namespace

const Primitives* avx2_primitives() { return &kAvx2; }

}  // namespace oocqr::simd

#else

namespace oocqr::simd {
const Primitives* avx2_primitives() { return nullptr; }
}  // namespace oocqr::simd

#endif
