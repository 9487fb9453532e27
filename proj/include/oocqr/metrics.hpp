#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "oocqr/tile_store.hpp"

namespace oocqr {

double mse(std::span<const double> ref, std::span<const double> rec);

/// 10 log10(max(ref)^2 / mse); +infinity when mse is 0. Throws
/// std::domain_error when the reference has no positive maximum.
double psnr(std::span<const double> ref, std::span<const double> rec);

struct SsimParams {
  std::size_t window = 8;
  /// Dynamic range; <= 0 means max(ref), or 1 if that is not positive.
  double dynamic_range = 0.0;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM over every window x window block (stride 1) of two row-major
/// width x height images, with uniform weights and population statistics.
double ssim(std::span<const double> ref, std::span<const double> rec, std::size_t width,
            std::size_t height, const SsimParams& params = {});

/// ||A X - B||_F / ||A||_F, streaming A, X and B tile by tile from disk.
double relative_residual(const TiledMatrix& a, const TiledMatrix& x, const TiledMatrix& b);

struct SliceQuality {
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct QualityReport {
  std::vector<SliceQuality> slices;
  double avg_mse = 0.0;
  double avg_psnr = 0.0;  // +infinity if any slice is exact
  double avg_ssim = 0.0;

  void write_key_value(std::ostream& os) const;
  void write_csv(std::ostream& os) const;
};

/// Scores every column (one n x n image each) of two N x slices stacks.
QualityReport score_stack(std::span<const double> ref, std::span<const double> rec, std::size_t n,
                          std::size_t slices, const SsimParams& params = {});

}  // namespace oocqr
