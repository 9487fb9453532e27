#pragma once

// In-core operations on b x b column-major tiles: the four QR building blocks
// of the tiled algorithm plus the triangular solve and the minus-update used
// in back substitution.
//
// Reflector storage. A dense-QR tile keeps R on and above the diagonal and
// unit-lower Householder vectors below it (unit diagonal implicit). A TD-QR
// reflector tile D keeps the full b-row lower parts of vectors of the form
// [e_j; d_j] (the top part is a unit vector in the triangular tile and is not
// stored). Applying the transforms of one inner panel of width w uses the
// compact form H_1...H_w = I - V T V^T.
//
// S-factor packing. For inner panel p (columns p*w .. p*w+wp-1) the wp x wp
// upper-triangular T is stored at rows p*w.., columns 0..wp-1 of the S tile.
// Everything else in the S tile is zero.
//
// Extents. `ncols` limits work to the leading logical columns of a tile and
// `nrefl` to the leading reflectors; trailing padded columns are zero and
// stay zero, so skipping them changes no logical entry.

#include <cstddef>
#include <span>

#include "oocqr/simd.hpp"

namespace oocqr::kernels {

inline constexpr std::size_t kAll = static_cast<std::size_t>(-1);

struct KernelConfig {
  std::size_t tile_size = 0;
  std::size_t inner_block = 128;
  /// Threads used inside one kernel call (split over output columns).
  unsigned workers = 1;
  /// Primitive flavour; nullptr means simd::active().
  const simd::Primitives* prims = nullptr;
};

/// Householder QR of tile A in place; S receives the packed panel factors.
void comp_dense_qr(std::span<double> a, std::span<double> s, const KernelConfig& cfg,
                   std::size_t ncols = kAll);

/// C := Q^T C for the Q encoded by (Y, S) from comp_dense_qr.
void apply_left_qt_dense(std::span<const double> y, std::span<const double> s, std::span<double> c,
                         const KernelConfig& cfg, std::size_t nrefl = kAll,
                         std::size_t ncols = kAll);

/// C := Q C, the inverse of apply_left_qt_dense.
void apply_left_q_dense(std::span<const double> y, std::span<const double> s, std::span<double> c,
                        const KernelConfig& cfg, std::size_t nrefl = kAll, std::size_t ncols = kAll);

/// QR of the stacked [upper(T); D]. upper(T) becomes the new R, D the
/// reflectors, S the packed factors. The strictly lower part of T is not read
/// or written (in the tiled algorithm it holds dense-QR reflectors). With
/// `check_triangular`, a strictly lower part above 1e-14*|T|_F is rejected.
void comp_td_qr(std::span<double> t, std::span<double> d, std::span<double> s,
                const KernelConfig& cfg, std::size_t ncols = kAll, bool check_triangular = false);

/// [F; G] := Q^T [F; G] for the Q encoded by (D, S) from comp_td_qr.
void apply_left_qt_td(std::span<const double> d, std::span<const double> s, std::span<double> f,
                      std::span<double> g, const KernelConfig& cfg, std::size_t nrefl = kAll,
                      std::size_t ncols = kAll);

/// [F; G] := Q [F; G], the inverse of apply_left_qt_td.
void apply_left_q_td(std::span<const double> d, std::span<const double> s, std::span<double> f,
                     std::span<double> g, const KernelConfig& cfg, std::size_t nrefl = kAll,
                     std::size_t ncols = kAll);

/// B := upper(R)^-1 B on the leading n x n triangle; rows n..b-1 of B are
/// zeroed. Throws SingularMatrixError naming `col_offset + j` for the first
/// diagonal entry with magnitude below 1e-300.
void trsm_lunn(std::span<const double> r, std::span<double> b, const KernelConfig& cfg,
               std::size_t n = kAll, std::size_t ncols = kAll, std::size_t col_offset = 0);

/// C := C - A B.
void gemm_nn_mo(std::span<double> c, std::span<const double> a, std::span<const double> b,
                const KernelConfig& cfg, std::size_t ncols = kAll);

inline constexpr double kSingularThreshold = 1e-300;

}  // namespace oocqr::kernels
