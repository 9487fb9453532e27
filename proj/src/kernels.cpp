#include "oocqr/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>
#include <vector>

#include "oocqr/errors.hpp"

namespace oocqr::kernels {
namespace {

using simd::Primitives;

constexpr std::size_t kMinColumnsPerWorker = 16;

struct Ctx {
  std::size_t b;
  std::size_t w;
  unsigned workers;
  const Primitives& p;
};

Ctx make_ctx(const KernelConfig& cfg) {
  if (cfg.tile_size == 0) throw std::invalid_argument("kernel tile size must be positive");
  if (cfg.inner_block == 0 || cfg.inner_block > cfg.tile_size)
    throw std::invalid_argument("inner block must satisfy 1 <= w <= b");
  return Ctx{cfg.tile_size, cfg.inner_block, std::max(1u, cfg.workers),
             cfg.prims ? *cfg.prims : simd::active()};
}

void check_tile(std::size_t size, const Ctx& c, const char* what) {
  if (size != c.b * c.b)
    throw std::invalid_argument(std::string(what) + ": tile is not b x b");
}

std::size_t clamp_extent(std::size_t n, const Ctx& c) { return n == kAll ? c.b : std::min(n, c.b); }

// Runs fn(j0, j1) over a partition of [0, n). Partitions never change the
// value of any output column (see simd.hpp), only who computes it.
template <class Fn>
void for_column_ranges(std::size_t n, unsigned workers, Fn&& fn) {
  std::size_t chunks = std::min<std::size_t>(workers, n / kMinColumnsPerWorker);
  if (chunks <= 1) {
    if (n > 0) fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::exception_ptr> errors(chunks);
  std::vector<std::thread> pool;
  pool.reserve(chunks - 1);
  auto bound = [&](std::size_t t) { return n * t / chunks; };
  for (std::size_t t = 1; t < chunks; ++t)
    pool.emplace_back([&, t] {
      try {
        fn(bound(t), bound(t + 1));
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  try {
    fn(bound(0), bound(1));
  } catch (...) {
    errors[0] = std::current_exception();
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double nrm2(const double* x, std::size_t n) {
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(x[i]));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double ssq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double t = x[i] / scale;
    ssq += t * t;
  }
  return scale * std::sqrt(ssq);
}

// Generates H = I - tau [1; v][1; v]^T with H [alpha; x] = [beta; 0].
// On return alpha holds beta and x holds v. tau == 0 means H = I.
double householder(double& alpha, double* x, std::size_t n) {
  double xnorm = nrm2(x, n);
  if (xnorm == 0.0) return 0.0;
  double beta = -std::copysign(std::hypot(alpha, xnorm), alpha);
  double tau = (beta - alpha) / beta;
  double scal = 1.0 / (alpha - beta);
  for (std::size_t i = 0; i < n; ++i) x[i] *= scal;
  alpha = beta;
  return tau;
}

// T[0:k, k] = -tau_k T[0:k, 0:k] z for upper-triangular T (column k of the
// compact-WY factor), T[k, k] = tau_k.
void extend_t_column(double* t, std::size_t ldt, std::size_t k, double tau, const double* z) {
  for (std::size_t i = 0; i < k; ++i) {
    double s = 0.0;
    for (std::size_t l = i; l < k; ++l) s += t[i + l * ldt] * z[l];
    t[i + k * ldt] = -tau * s;
  }
  t[k + k * ldt] = tau;
}

bool all_finite(const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(x[i])) return false;
  return true;
}

// C(m x nc) := C - V t_apply^T V^T C. V is an explicit m x k matrix; pass T
// for Q^T and T^T for Q.
void apply_block_reflector(const Ctx& c, std::size_t m, std::size_t k, const double* v,
                           std::size_t ldv, const double* t_apply, std::size_t ldt, double* cm,
                           std::size_t ldc, std::size_t nc) {
  for_column_ranges(nc, c.workers, [&](std::size_t j0, std::size_t j1) {
    const std::size_t nj = j1 - j0;
    std::vector<double> w(k * nj), w2(k * nj);
    double* cj = cm + j0 * ldc;
    c.p.gemm_tn(m, nj, k, v, ldv, cj, ldc, w.data(), k);
    c.p.gemm_tn(k, nj, k, t_apply, ldt, w.data(), k, w2.data(), k);
    c.p.gemm_nn_sub(m, nj, k, v, ldv, w2.data(), k, cj, ldc);
  });
}

// Same for the TD structure: reflectors [e; V] act on rows [F_rows; G].
void apply_td_block_reflector(const Ctx& c, std::size_t k, const double* v, const double* t_apply,
                              std::size_t ldt, double* f_rows, double* g, std::size_t nc) {
  const std::size_t b = c.b;
  for_column_ranges(nc, c.workers, [&](std::size_t j0, std::size_t j1) {
    const std::size_t nj = j1 - j0;
    std::vector<double> w(k * nj), w2(k * nj);
    double* fj = f_rows + j0 * b;
    double* gj = g + j0 * b;
    c.p.gemm_tn(b, nj, k, v, b, gj, b, w.data(), k);
    for (std::size_t j = 0; j < nj; ++j)
      for (std::size_t i = 0; i < k; ++i) w[i + j * k] += fj[i + j * b];
    c.p.gemm_tn(k, nj, k, t_apply, ldt, w.data(), k, w2.data(), k);
    for (std::size_t j = 0; j < nj; ++j)
      for (std::size_t i = 0; i < k; ++i) fj[i + j * b] -= w2[i + j * k];
    c.p.gemm_nn_sub(b, nj, k, v, b, w2.data(), k, gj, b);
  });
}

// Explicit unit-lower V (rows j0..b-1, wp columns) from reflectors stored
// below the diagonal of a dense-QR tile.
std::vector<double> explicit_panel(const double* y, std::size_t b, std::size_t j0, std::size_t wp) {
  const std::size_t m = b - j0;
  std::vector<double> v(m * wp, 0.0);
  for (std::size_t jj = 0; jj < wp; ++jj) {
    const double* col = y + (j0 + jj) * b + j0;
    double* out = v.data() + jj * m;
    out[jj] = 1.0;
    for (std::size_t i = jj + 1; i < m; ++i) out[i] = col[i];
  }
  return v;
}

// Copies the wp x wp T of the panel at row j0 of S, transposed if asked.
std::vector<double> panel_t(const double* s, std::size_t b, std::size_t j0, std::size_t wp,
                            bool transpose) {
  std::vector<double> t(wp * wp, 0.0);
  for (std::size_t j = 0; j < wp; ++j)
    for (std::size_t i = 0; i <= j; ++i) {
      double v = s[(j0 + i) + j * b];
      if (transpose)
        t[j + i * wp] = v;
      else
        t[i + j * wp] = v;
    }
  return t;
}

void apply_dense(const Ctx& c, const double* y, const double* s, double* cm, std::size_t nrefl,
                 std::size_t ncols, bool transpose) {
  const std::size_t b = c.b;
  std::vector<std::size_t> panels;
  for (std::size_t j0 = 0; j0 < nrefl; j0 += c.w) panels.push_back(j0);
  if (!transpose) std::reverse(panels.begin(), panels.end());
  for (std::size_t j0 : panels) {
    const std::size_t wp = std::min(c.w, nrefl - j0);
    auto v = explicit_panel(y, b, j0, wp);
    // W2 = T^T W for Q^T, T W for Q; gemm_tn multiplies by the transpose.
    auto t = panel_t(s, b, j0, wp, !transpose);
    apply_block_reflector(c, b - j0, wp, v.data(), b - j0, t.data(), wp, cm + j0, b, ncols);
  }
}

void apply_td(const Ctx& c, const double* d, const double* s, double* f, double* g,
              std::size_t nrefl, std::size_t ncols, bool transpose) {
  const std::size_t b = c.b;
  std::vector<std::size_t> panels;
  for (std::size_t j0 = 0; j0 < nrefl; j0 += c.w) panels.push_back(j0);
  if (!transpose) std::reverse(panels.begin(), panels.end());
  for (std::size_t j0 : panels) {
    const std::size_t wp = std::min(c.w, nrefl - j0);
    auto t = panel_t(s, b, j0, wp, !transpose);
    apply_td_block_reflector(c, wp, d + j0 * b, t.data(), wp, f + j0, g, ncols);
  }
}

}  // namespace

void comp_dense_qr(std::span<double> a, std::span<double> s, const KernelConfig& cfg,
                   std::size_t ncols) {
  const Ctx c = make_ctx(cfg);
  check_tile(a.size(), c, "comp_dense_qr A");
  check_tile(s.size(), c, "comp_dense_qr S");
  if (!all_finite(a.data(), a.size())) throw std::domain_error("comp_dense_qr: non-finite entry");
  const std::size_t b = c.b;
  const std::size_t nc = clamp_extent(ncols, c);
  double* A = a.data();
  double* S = s.data();
  std::fill(s.begin(), s.end(), 0.0);

  std::vector<double> z(c.w), wrow(c.w);
  for (std::size_t j0 = 0; j0 < nc; j0 += c.w) {
    const std::size_t wp = std::min(c.w, nc - j0);
    double* T = S + j0;  // wp x wp block at rows j0.., ld b

    for (std::size_t jj = 0; jj < wp; ++jj) {
      const std::size_t j = j0 + jj;
      const std::size_t below = b - j - 1;
      double* x = A + j * b + j + 1;
      const double tau = householder(A[j + j * b], x, below);

      // Apply H_j to the rest of the panel.
      const std::size_t rest = wp - jj - 1;
      if (rest > 0 && tau != 0.0) {
        double* cpanel = A + (j + 1) * b + j;  // row j, column j+1
        c.p.gemm_tn(below, rest, 1, x, b, cpanel + 1, b, wrow.data(), 1);
        for (std::size_t q = 0; q < rest; ++q) {
          wrow[q] = tau * (wrow[q] + cpanel[q * b]);
          cpanel[q * b] -= wrow[q];
        }
        c.p.gemm_nn_sub(below, rest, 1, x, b, wrow.data(), 1, cpanel + 1, b);
      }

      // Column jj of the panel's T factor.
      if (jj > 0) {
        c.p.gemm_tn(below, 1, jj, A + j0 * b + j + 1, b, x, b, z.data(), jj);
        for (std::size_t i = 0; i < jj; ++i) z[i] += A[j + (j0 + i) * b];
      }
      extend_t_column(T, b, jj, tau, z.data());
    }

    if (j0 + wp < nc) {
      auto v = explicit_panel(A, b, j0, wp);
      auto t = panel_t(S, b, j0, wp, false);
      apply_block_reflector(c, b - j0, wp, v.data(), b - j0, t.data(), wp,
                            A + (j0 + wp) * b + j0, b, nc - j0 - wp);
    }
  }
}

void apply_left_qt_dense(std::span<const double> y, std::span<const double> s, std::span<double> cm,
                         const KernelConfig& cfg, std::size_t nrefl, std::size_t ncols) {
  const Ctx c = make_ctx(cfg);
  check_tile(y.size(), c, "apply_left_qt_dense Y");
  check_tile(s.size(), c, "apply_left_qt_dense S");
  check_tile(cm.size(), c, "apply_left_qt_dense C");
  apply_dense(c, y.data(), s.data(), cm.data(), clamp_extent(nrefl, c), clamp_extent(ncols, c), true);
}

void apply_left_q_dense(std::span<const double> y, std::span<const double> s, std::span<double> cm,
                        const KernelConfig& cfg, std::size_t nrefl, std::size_t ncols) {
  const Ctx c = make_ctx(cfg);
  check_tile(y.size(), c, "apply_left_q_dense Y");
  check_tile(s.size(), c, "apply_left_q_dense S");
  check_tile(cm.size(), c, "apply_left_q_dense C");
  apply_dense(c, y.data(), s.data(), cm.data(), clamp_extent(nrefl, c), clamp_extent(ncols, c), false);
}

void comp_td_qr(std::span<double> t, std::span<double> d, std::span<double> s,
                const KernelConfig& cfg, std::size_t ncols, bool check_triangular) {
  const Ctx c = make_ctx(cfg);
  check_tile(t.size(), c, "comp_td_qr T");
  check_tile(d.size(), c, "comp_td_qr D");
  check_tile(s.size(), c, "comp_td_qr S");
  const std::size_t b = c.b;
  const std::size_t nc = clamp_extent(ncols, c);
  double* T = t.data();
  double* D = d.data();
  double* S = s.data();

  double upper_ss = 0.0, lower_ss = 0.0;
  for (std::size_t j = 0; j < b; ++j)
    for (std::size_t i = 0; i < b; ++i) {
      double v = T[i + j * b];
      if (i <= j) {
        if (!std::isfinite(v)) throw std::domain_error("comp_td_qr: non-finite entry in T");
        upper_ss += v * v;
      } else {
        lower_ss += v * v;
      }
    }
  if (check_triangular && std::sqrt(lower_ss) > 1e-14 * std::sqrt(upper_ss + lower_ss))
    throw std::invalid_argument("comp_td_qr: T is not upper triangular");
  if (!all_finite(D, d.size())) throw std::domain_error("comp_td_qr: non-finite entry in D");

  std::fill(s.begin(), s.end(), 0.0);
  std::vector<double> z(c.w), wrow(c.w);
  for (std::size_t j0 = 0; j0 < nc; j0 += c.w) {
    const std::size_t wp = std::min(c.w, nc - j0);
    double* Tf = S + j0;

    for (std::size_t jj = 0; jj < wp; ++jj) {
      const std::size_t j = j0 + jj;
      double* v = D + j * b;
      const double tau = householder(T[j + j * b], v, b);

      const std::size_t rest = wp - jj - 1;
      if (rest > 0 && tau != 0.0) {
        double* trow = T + (j + 1) * b + j;  // T[j, j+1..]
        double* drest = D + (j + 1) * b;
        c.p.gemm_tn(b, rest, 1, v, b, drest, b, wrow.data(), 1);
        for (std::size_t q = 0; q < rest; ++q) {
          wrow[q] = tau * (wrow[q] + trow[q * b]);
          trow[q * b] -= wrow[q];
        }
        c.p.gemm_nn_sub(b, rest, 1, v, b, wrow.data(), 1, drest, b);
      }

      // The unit top parts are distinct e_j, so only the D parts interact.
      if (jj > 0) c.p.gemm_tn(b, 1, jj, D + j0 * b, b, v, b, z.data(), jj);
      extend_t_column(Tf, b, jj, tau, z.data());
    }

    if (j0 + wp < nc) {
      auto tp = panel_t(S, b, j0, wp, false);
      apply_td_block_reflector(c, wp, D + j0 * b, tp.data(), wp, T + (j0 + wp) * b + j0,
                               D + (j0 + wp) * b, nc - j0 - wp);
    }
  }
}

void apply_left_qt_td(std::span<const double> d, std::span<const double> s, std::span<double> f,
                      std::span<double> g, const KernelConfig& cfg, std::size_t nrefl,
                      std::size_t ncols) {
  const Ctx c = make_ctx(cfg);
  check_tile(d.size(), c, "apply_left_qt_td D");
  check_tile(s.size(), c, "apply_left_qt_td S");
  check_tile(f.size(), c, "apply_left_qt_td F");
  check_tile(g.size(), c, "apply_left_qt_td G");
  apply_td(c, d.data(), s.data(), f.data(), g.data(), clamp_extent(nrefl, c), clamp_extent(ncols, c),
           true);
}

void apply_left_q_td(std::span<const double> d, std::span<const double> s, std::span<double> f,
                     std::span<double> g, const KernelConfig& cfg, std::size_t nrefl,
                     std::size_t ncols) {
  const Ctx c = make_ctx(cfg);
  check_tile(d.size(), c, "apply_left_q_td D");
  check_tile(s.size(), c, "apply_left_q_td S");
  check_tile(f.size(), c, "apply_left_q_td F");
  check_tile(g.size(), c, "apply_left_q_td G");
  apply_td(c, d.data(), s.data(), f.data(), g.data(), clamp_extent(nrefl, c), clamp_extent(ncols, c),
           false);
}

void trsm_lunn(std::span<const double> r, std::span<double> bm, const KernelConfig& cfg,
               std::size_t n, std::size_t ncols, std::size_t col_offset) {
  const Ctx c = make_ctx(cfg);
  check_tile(r.size(), c, "trsm_lunn R");
  check_tile(bm.size(), c, "trsm_lunn B");
  const std::size_t b = c.b;
  const std::size_t nn = clamp_extent(n, c);
  const std::size_t nc = clamp_extent(ncols, c);
  const double* R = r.data();
  double* B = bm.data();

  for (std::size_t j = 0; j < nn; ++j)
    if (!(std::abs(R[j + j * b]) >= kSingularThreshold)) throw SingularMatrixError(col_offset + j);

  for_column_ranges(nc, c.workers, [&](std::size_t c0, std::size_t c1) {
    double* Bc = B + c0 * b;
    const std::size_t cols = c1 - c0;
    for (std::size_t col = 0; col < cols; ++col)
      std::fill(Bc + col * b + nn, Bc + (col + 1) * b, 0.0);
    std::size_t blocks = (nn + c.w - 1) / c.w;
    for (std::size_t blk = blocks; blk-- > 0;) {
      const std::size_t i0 = blk * c.w;
      const std::size_t i1 = std::min(nn, i0 + c.w);
      for (std::size_t col = 0; col < cols; ++col) {
        double* x = Bc + col * b;
        for (std::size_t i = i1; i-- > i0;) {
          double sum = x[i];
          for (std::size_t l = i + 1; l < i1; ++l) sum -= R[i + l * b] * x[l];
          x[i] = sum / R[i + i * b];
        }
      }
      if (i0 > 0) c.p.gemm_nn_sub(i0, cols, i1 - i0, R + i0 * b, b, Bc + i0, b, Bc, b);
    }
  });
}

void gemm_nn_mo(std::span<double> cm, std::span<const double> a, std::span<const double> bm,
                const KernelConfig& cfg, std::size_t ncols) {
  const Ctx c = make_ctx(cfg);
  check_tile(cm.size(), c, "gemm_nn_mo C");
  check_tile(a.size(), c, "gemm_nn_mo A");
  check_tile(bm.size(), c, "gemm_nn_mo B");
  const std::size_t b = c.b;
  const std::size_t nc = clamp_extent(ncols, c);
  for_column_ranges(nc, c.workers, [&](std::size_t j0, std::size_t j1) {
    c.p.gemm_nn_sub(b, j1 - j0, b, a.data(), b, bm.data() + j0 * b, b, cm.data() + j0 * b, b);
  });
}

}  // namespace oocqr::kernels
