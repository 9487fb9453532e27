#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace oocqr {

struct Ellipse {
  double cx = 0.0, cy = 0.0;  // centre, cm
  double a = 0.0, b = 0.0;    // semi-axes along the rotated x and y axes, cm
  double theta = 0.0;         // rotation, degrees counter-clockwise
  double density = 0.0;       // additive
};

struct Phantom {
  std::vector<Ellipse> ellipses;

  /// Sum of the densities of the ellipses containing (x, y).
  double density_at(double x, double y) const;
};

/// Modified Shepp-Logan head, scaled so its outer ellipse fits a square of
/// side `fov` centred at the origin.
Phantom shepp_logan(double fov);

/// Plain-text ellipse list: one "cx cy a b theta density" per line; blank
/// lines and lines starting with '#' are ignored.
Phantom load_phantom(const std::filesystem::path& path);
void save_phantom(const Phantom& p, const std::filesystem::path& path);

/// Row-major n x n image of side `fov`: each pixel is the density at its centre.
std::vector<double> rasterize(const Phantom& p, std::size_t n, double fov);

/// Slice `s` of a stack of `slices` through a 3-D version of the phantom:
/// every semi-axis is scaled by sqrt(1 - z^2) with z = 0.8*((2s+1)/slices - 1).
Phantom phantom_slice(const Phantom& p, std::size_t s, std::size_t slices);

/// N x slices column-major stack of rasterized slices.
std::vector<double> rasterize_stack(const Phantom& p, std::size_t n, double fov, std::size_t slices);

}  // namespace oocqr
