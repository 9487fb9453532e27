#include "oocqr/projector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace oocqr {

double SparseRow::sum() const { return std::accumulate(weight.begin(), weight.end(), 0.0); }

namespace {

void emit(SparseRow& out, std::size_t idx, double w) {
  if (w <= 0.0) return;
  out.index.push_back(static_cast<std::uint32_t>(idx));
  out.weight.push_back(w);
}

void check_angles(const ScannerGeometry& g, std::span<const double> angles) {
  if (angles.size() != g.views)
    throw std::invalid_argument("angle schedule has " + std::to_string(angles.size()) +
                                " entries, geometry has " + std::to_string(g.views) + " views");
}

// Lower neighbour and interpolation weight of fractional pixel coordinate f.
// Within half a pixel of the border the sample belongs wholly to the edge pixel.
std::pair<long, double> straddle(double f, long nn) {
  if (f <= 0.0) return {0, 0.0};
  if (f >= static_cast<double>(nn - 1)) return {nn - 1, 0.0};
  const double f0 = std::floor(f);
  return {static_cast<long>(f0), f - f0};
}

}  // namespace

void joseph_ray(std::size_t n, double fov, const Ray& ray, SparseRow& out) {
  out.clear();
  const double half = fov / 2.0;
  if (std::abs(ray.sx) < half && std::abs(ray.sy) < half)
    throw std::domain_error("ray source lies inside the image square");
  const double len = std::hypot(ray.dx, ray.dy);
  if (!(len > 0.0)) throw std::domain_error("ray has zero direction");
  const double dx = ray.dx / len, dy = ray.dy / len;
  const double ps = fov / static_cast<double>(n);
  const long nn = static_cast<long>(n);

  if (std::abs(dx) >= std::abs(dy)) {
    const double step = ps / std::abs(dx);
    for (long c = 0; c < nn; ++c) {
      const double x = -half + (static_cast<double>(c) + 0.5) * ps;
      const double t = (x - ray.sx) / dx;
      if (t < 0.0) continue;
      const double y = ray.sy + t * dy;
      if (y < -half || y > half) continue;
      auto [r, w] = straddle((half - y) / ps - 0.5, nn);
      emit(out, static_cast<std::size_t>(r * nn + c), (1.0 - w) * step);
      if (w > 0.0) emit(out, static_cast<std::size_t>((r + 1) * nn + c), w * step);
    }
  } else {
    const double step = ps / std::abs(dy);
    for (long r = 0; r < nn; ++r) {
      const double y = half - (static_cast<double>(r) + 0.5) * ps;
      const double t = (y - ray.sy) / dy;
      if (t < 0.0) continue;
      const double x = ray.sx + t * dx;
      if (x < -half || x > half) continue;
      auto [c, w] = straddle((x + half) / ps - 0.5, nn);
      emit(out, static_cast<std::size_t>(r * nn + c), (1.0 - w) * step);
      if (w > 0.0) emit(out, static_cast<std::size_t>(r * nn + c + 1), w * step);
    }
  }
}

SparseRow joseph_row(const ScannerGeometry& g, std::span<const double> angles, std::size_t view,
                     std::size_t detector) {
  check_angles(g, angles);
  if (view >= g.views || detector >= g.detectors)
    throw std::out_of_range("view/detector index outside the geometry");
  SparseRow row;
  joseph_ray(g.n, g.fov(), detector_ray(g, angles[view], detector), row);
  return row;
}

std::size_t assemble_system_matrix(const ScannerGeometry& g, std::span<const double> angles,
                                   const TiledMatrix& out) {
  check_angles(g, angles);
  if (out.rows() != g.rows() || out.cols() != g.cols())
    throw std::invalid_argument("system matrix store is " + std::to_string(out.rows()) + " x " +
                                std::to_string(out.cols()) + ", geometry needs " +
                                std::to_string(g.rows()) + " x " + std::to_string(g.cols()));
  const std::size_t b = out.tile_size();
  struct Entry {
    std::uint32_t row, col;
    double w;
  };
  std::vector<std::vector<Entry>> buckets(out.grid_cols());
  std::vector<double> tile(out.tile_elems());
  SparseRow ray;
  std::size_t written = 0;

  for (std::size_t rb = 0; rb < out.grid_rows(); ++rb) {
    for (auto& bk : buckets) bk.clear();
    const std::size_t r_end = std::min(g.rows(), (rb + 1) * b);
    for (std::size_t row = rb * b; row < r_end; ++row) {
      const std::size_t view = row / g.detectors, det = row % g.detectors;
      joseph_ray(g.n, g.fov(), detector_ray(g, angles[view], det), ray);
      for (std::size_t e = 0; e < ray.size(); ++e) {
        const std::size_t col = ray.index[e];
        buckets[col / b].push_back(Entry{static_cast<std::uint32_t>(row - rb * b),
                                         static_cast<std::uint32_t>(col % b), ray.weight[e]});
      }
    }
    for (std::size_t cb = 0; cb < out.grid_cols(); ++cb) {
      if (buckets[cb].empty()) continue;
      std::fill(tile.begin(), tile.end(), 0.0);
      for (const Entry& e : buckets[cb]) tile[e.row + static_cast<std::size_t>(e.col) * b] += e.w;
      out.store({rb, cb}, tile);
      ++written;
    }
  }
  return written;
}

std::vector<double> forward_project(const ScannerGeometry& g, std::span<const double> angles,
                                    std::span<const double> image) {
  return forward_project_stack(g, angles, image, 1);
}

std::vector<double> forward_project_stack(const ScannerGeometry& g, std::span<const double> angles,
                                          std::span<const double> images, std::size_t count) {
  check_angles(g, angles);
  const std::size_t N = g.cols(), M = g.rows();
  if (images.size() != N * count)
    throw std::invalid_argument("image stack size does not match n^2 * count");
  std::vector<double> sino(M * count, 0.0);
  SparseRow ray;
  for (std::size_t row = 0; row < M; ++row) {
    joseph_ray(g.n, g.fov(), detector_ray(g, angles[row / g.detectors], row % g.detectors), ray);
    for (std::size_t s = 0; s < count; ++s) {
      const double* img = images.data() + s * N;
      double acc = 0.0;
      for (std::size_t e = 0; e < ray.size(); ++e) acc += ray.weight[e] * img[ray.index[e]];
      sino[row + s * M] = acc;
    }
  }
  return sino;
}

}  // namespace oocqr
