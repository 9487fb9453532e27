#pragma once

// Level-3 primitives behind every tile kernel, in a scalar reference flavour
// and SIMD flavours picked at runtime. All matrices are column-major with
// explicit leading dimensions.
//
// Contract shared by every flavour: the value written to one output element
// depends only on the operands of that element, never on how the output is
// split into blocks or column ranges. Splitting work across threads by
// column ranges is therefore bitwise reproducible within one flavour.

#include <cstddef>
#include <string_view>

namespace oocqr::simd {

enum class Level { scalar, avx2 };

struct Primitives {
  Level level;
  const char* name;

  /// C(k x n) = A(m x k)^T * B(m x n).
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                  const double* b, std::size_t ldb, double* c, std::size_t ldc);

  /// C(m x n) -= A(m x k) * B(k x n).
  void (*gemm_nn_sub)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                      std::size_t lda, const double* b, std::size_t ldb, double* c,
                      std::size_t ldc);
};

const Primitives& scalar_primitives();
/// nullptr when the AVX2 flavour was not compiled in.
const Primitives* avx2_primitives();

bool cpu_supports(Level level);

/// Flavour used when callers do not pick one: the OOCQR_SIMD environment
/// variable ("scalar" or "avx2") if set, otherwise the best the CPU supports.
const Primitives& active();
/// Throws std::runtime_error if the flavour is unavailable on this build/CPU.
const Primitives& select(Level level);
Level parse_level(std::string_view name);

}  // namespace oocqr::simd
