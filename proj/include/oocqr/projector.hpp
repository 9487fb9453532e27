#pragma once

// Joseph's interpolating ray projector. A ray marches one pixel at a time
// along its dominant axis; at each step the two pixels straddling the ray on
// the other axis share the step length in proportion to their distance.
// Samples are taken only inside the image square; within half a pixel of
// its border the whole step goes to the edge pixel.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "oocqr/geometry.hpp"
#include "oocqr/tile_store.hpp"

namespace oocqr {

struct SparseRow {
  std::vector<std::uint32_t> index;  // row-major pixel index
  std::vector<double> weight;        // cm

  std::size_t size() const { return index.size(); }
  double sum() const;
  void clear() {
    index.clear();
    weight.clear();
  }
};

/// Weights of the half-line from (ray.sx, ray.sy) along (ray.dx, ray.dy) through
/// an n x n image of side `fov` centred at the origin. Throws std::domain_error
/// when the source lies inside the image square or the direction is zero.
void joseph_ray(std::size_t n, double fov, const Ray& ray, SparseRow& out);

/// Row view*detectors + detector of the system matrix.
SparseRow joseph_row(const ScannerGeometry& g, std::span<const double> angles, std::size_t view,
                     std::size_t detector);

/// Writes the system matrix into `out` (rows = detectors*views, cols = n^2),
/// one tile row panel at a time. Tiles without a nonzero weight are not
/// written. Returns the number of tiles written.
std::size_t assemble_system_matrix(const ScannerGeometry& g, std::span<const double> angles,
                                   const TiledMatrix& out);

/// Sinogram of one row-major n x n image, length detectors*views.
std::vector<double> forward_project(const ScannerGeometry& g, std::span<const double> angles,
                                    std::span<const double> image);

/// Sinograms of `count` images stored as consecutive columns (N x count,
/// column-major); result is M x count column-major.
std::vector<double> forward_project_stack(const ScannerGeometry& g, std::span<const double> angles,
                                          std::span<const double> images, std::size_t count);

}  // namespace oocqr
