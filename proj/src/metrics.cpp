#include "oocqr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "oocqr/simd.hpp"

namespace oocqr {

namespace {
void same_size(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("images differ in size or are empty");
}
}  // namespace

double mse(std::span<const double> ref, std::span<const double> rec) {
  same_size(ref, rec);
  double s = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = ref[i] - rec[i];
    s += d * d;
  }
  return s / static_cast<double>(ref.size());
}

double psnr(std::span<const double> ref, std::span<const double> rec) {
  same_size(ref, rec);
  const double peak = *std::max_element(ref.begin(), ref.end());
  if (!(peak > 0.0)) throw std::domain_error("PSNR undefined: reference image has no positive maximum");
  const double e = mse(ref, rec);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / e);
}

double ssim(std::span<const double> ref, std::span<const double> rec, std::size_t width,
            std::size_t height, const SsimParams& p) {
  same_size(ref, rec);
  if (ref.size() != width * height) throw std::invalid_argument("ssim: size does not match width*height");
  const std::size_t w = p.window;
  if (w == 0 || w > width || w > height) throw std::invalid_argument("ssim: window larger than image");
  double L = p.dynamic_range;
  if (!(L > 0.0)) {
    L = *std::max_element(ref.begin(), ref.end());
    if (!(L > 0.0)) L = 1.0;
  }
  const double c1 = (p.k1 * L) * (p.k1 * L);
  const double c2 = (p.k2 * L) * (p.k2 * L);
  const double count = static_cast<double>(w * w);

  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t r0 = 0; r0 + w <= height; ++r0)
    for (std::size_t c0 = 0; c0 + w <= width; ++c0) {
      double mx = 0.0, my = 0.0;
      for (std::size_t r = r0; r < r0 + w; ++r)
        for (std::size_t c = c0; c < c0 + w; ++c) {
          mx += ref[r * width + c];
          my += rec[r * width + c];
        }
      mx /= count;
      my /= count;
      double vx = 0.0, vy = 0.0, cxy = 0.0;
      for (std::size_t r = r0; r < r0 + w; ++r)
        for (std::size_t c = c0; c < c0 + w; ++c) {
          const double dx = ref[r * width + c] - mx;
          const double dy = rec[r * width + c] - my;
          vx += dx * dx;
          vy += dy * dy;
          cxy += dx * dy;
        }
      vx /= count;
      vy /= count;
      cxy /= count;
      total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  return total / static_cast<double>(windows);
}

double relative_residual(const TiledMatrix& a, const TiledMatrix& x, const TiledMatrix& b) {
  if (a.cols() != x.rows() || a.rows() != b.rows() || x.cols() != b.cols())
    throw std::invalid_argument("relative_residual: A, X and B do not conform");
  if (a.tile_size() != x.tile_size() || a.tile_size() != b.tile_size())
    throw std::invalid_argument("relative_residual: tile sizes differ");
  const std::size_t t = a.tile_size();
  const simd::Primitives& prims = simd::active();
  std::vector<double> at(a.tile_elems()), xt(a.tile_elems()), rt(a.tile_elems());

  double a_ss = 0.0, r_ss = 0.0;
  for (std::size_t i = 0; i < a.grid_rows(); ++i)
    for (std::size_t j = 0; j < a.grid_cols(); ++j) {
      if (!a.has_tile({i, j})) continue;
      a.load({i, j}, at);
      for (double v : at) a_ss += v * v;
    }
  for (std::size_t i = 0; i < a.grid_rows(); ++i)
    for (std::size_t c = 0; c < b.grid_cols(); ++c) {
      b.load({i, c}, rt);
      for (std::size_t j = 0; j < a.grid_cols(); ++j) {
        if (!a.has_tile({i, j}) || !x.has_tile({j, c})) continue;
        a.load({i, j}, at);
        x.load({j, c}, xt);
        prims.gemm_nn_sub(t, t, t, at.data(), t, xt.data(), t, rt.data(), t);
      }
      for (double v : rt) r_ss += v * v;
    }
  if (a_ss == 0.0) return r_ss == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(r_ss) / std::sqrt(a_ss);
}

void QualityReport::write_key_value(std::ostream& os) const {
  os << "slices=" << slices.size() << '\n'
     << "avg_mse=" << avg_mse << '\n'
     << "avg_psnr=" << avg_psnr << '\n'
     << "avg_ssim=" << avg_ssim << '\n';
}

void QualityReport::write_csv(std::ostream& os) const {
  os << "slice,mse,psnr,ssim\n";
  for (std::size_t s = 0; s < slices.size(); ++s)
    os << s << ',' << slices[s].mse << ',' << slices[s].psnr << ',' << slices[s].ssim << '\n';
}

QualityReport score_stack(std::span<const double> ref, std::span<const double> rec, std::size_t n,
                          std::size_t slices, const SsimParams& params) {
  const std::size_t N = n * n;
  if (ref.size() != N * slices || rec.size() != N * slices)
    throw std::invalid_argument("score_stack: stacks must be n^2 x slices");
  QualityReport q;
  for (std::size_t s = 0; s < slices; ++s) {
    auto r = ref.subspan(s * N, N);
    auto x = rec.subspan(s * N, N);
    SliceQuality sq{mse(r, x), psnr(r, x), ssim(r, x, n, n, params)};
    q.slices.push_back(sq);
    q.avg_mse += sq.mse;
    q.avg_psnr += sq.psnr;
    q.avg_ssim += sq.ssim;
  }
  if (slices > 0) {
    q.avg_mse /= static_cast<double>(slices);
    q.avg_psnr /= static_cast<double>(slices);
    q.avg_ssim /= static_cast<double>(slices);
  }
  return q;
}

}  // namespace oocqr
