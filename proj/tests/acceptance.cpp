// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "oocqr/config.hpp"
#include "oocqr/engine.hpp"
#include "oocqr/geometry.hpp"
#include "oocqr/phantom.hpp"
#include "oocqr/pipeline.hpp"
#include "oocqr/projector.hpp"
#include "support/engine_fixture.hpp"
#include "support/golden_tasks.hpp"
#include "support/kernel_checks.hpp"
#include "support/ray_oracles.hpp"

using namespace oocqr;
using namespace testing;
namespace fs = std::filesystem;

namespace {

constexpr double kResidualTol = 1e-10;
constexpr double kPsnrMin = 200.0;
constexpr double kSsimMin = 0.999;
constexpr double kOracleTol = 1e-10;
constexpr double kWriteFactor = 3.0;
constexpr double kProjectorTol = 1e-12;
constexpr double kChordTol = 1.5;  // pixels
constexpr double kInversionTol = 0.05;
constexpr double kKernelTol = 1e-12;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), s);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

PipelineConfig desk_config(const fs::path& work) {
  return parse_config("geometry=scaled\nn=64\ntile_size=512\ninner_block=64\ncache_budget=48M\n"
                      "mode=overlapped\nwork_dir=" + work.string() + "\n");
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool same_tiles(const fs::path& a, const fs::path& b) {
  auto m = TiledMatrix::open(a);
  for (std::size_t i = 0; i < m.grid_rows(); ++i)
    for (std::size_t j = 0; j < m.grid_cols(); ++j) {
      auto rel = fs::relative(m.tile_path({i, j}), a);
      if (slurp(a / rel) != slurp(b / rel)) return false;
    }
  return true;
}

struct RandomSystem {
  std::size_t m, n, b, w, nrhs, cache;
  std::vector<double> a, rhs;
};

RandomSystem random_case(std::mt19937_64& rng) {
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  RandomSystem s;
  const std::size_t q = pick(1, 4), p = pick(q, 4);
  s.b = pick(8, 32);
  s.w = pick(1, s.b);
  s.n = pick((q - 1) * s.b + 1, q * s.b);
  s.m = std::max(s.n, pick((p - 1) * s.b + 1, p * s.b));
  s.nrhs = pick(1, 2 * s.b);
  s.cache = pick(4, 12);
  s.a = random_system(s.m, s.n, rng);
  s.rhs = random_matrix(s.m, s.nrhs, rng);
  return s;
}

// n=64 pipeline shared by criteria 1 and 2.
struct DeskRun {
  double residual = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  std::size_t slices = 0;
};

DeskRun run_desk(const fs::path& work) {
  auto cfg = desk_config(work);
  std::ostringstream log;
  cmd_build_matrix(cfg, log);
  cmd_factorize(cfg, true, log);
  cmd_project(cfg, log);
  auto sum = cmd_solve(cfg, log);
  DeskRun r;
  r.residual = sum.residual;
  r.slices = sum.slices;
  if (sum.quality) {
    r.psnr = sum.quality->avg_psnr;
    r.ssim = sum.quality->avg_ssim;
  }
  return r;
}

}  // namespace

int main() {
  TempDir root;
  DeskRun desk;
  bool desk_ok = false;
  std::string desk_error;
  const auto desk_t0 = std::chrono::steady_clock::now();
  try {
    desk = run_desk(root / "desk");
    desk_ok = true;
  } catch (const std::exception& e) {
    desk_error = e.what();
  }
  const double desk_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - desk_t0).count();

  report(1, "residual at 64x64", [&] {
    if (!desk_ok) return Outcome{false, desk_error};
    return Outcome{desk.residual <= kResidualTol,
                   fmt("relative residual %.3e over %.0f slices (limit 1e-10); pipeline took %.1f s", desk.residual,
                       double(desk.slices), desk_seconds)};
  });

  report(2, "quality at 64x64", [&] {
    if (!desk_ok) return Outcome{false, desk_error};
    return Outcome{desk.psnr >= kPsnrMin && desk.ssim >= kSsimMin,
                   fmt("average PSNR %.2f dB (min 200), SSIM %.6f (min 0.999)", desk.psnr, desk.ssim)};
  });

  report(3, "golden task lists", [] {
    const bool f = gen_factorization_tasks(3, 3) == golden_factorization_3x3();
    const bool s = gen_solve_tasks(3, 3, 1) == golden_solve_3x3();
    return Outcome{f && s, std::string("factorization 14 tasks ") + (f ? "match" : "differ") +
                               ", solve 12 tasks " + (s ? "match" : "differ")};
  });

  report(4, "out-of-core solve vs in-core oracle", [&] {
    std::mt19937_64 rng(20241);
    double worst = 0.0;
    for (int c = 0; c < 50; ++c) {
      auto s = random_case(rng);
      TempDir d;
      auto mode = (c % 2) ? Mode::overlapped : Mode::sequential;
      auto run = ooc_solve(s.a, s.m, s.n, s.rhs, s.nrhs, small_engine(s.b, s.w, s.cache, mode), d.path());
      DenseQr oracle(s.a, s.m, s.n);
      worst = std::max(worst, relative_error(run.x, oracle.solve(s.rhs, s.nrhs)));
    }
    return Outcome{worst <= kOracleTol, fmt("50 systems, worst relative error on X %.3e (limit 1e-10)", worst)};
  });

  report(5, "determinism across modes", [&] {
    std::mt19937_64 rng(20242);
    int identical = 0;
    for (int c = 0; c < 20; ++c) {
      auto s = random_case(rng);
      TempDir d1, d2;
      auto seq = small_engine(s.b, s.w, s.cache, Mode::sequential);
      auto ovl = small_engine(s.b, s.w, s.cache, Mode::overlapped);
      ovl.compute_workers = 1 + static_cast<unsigned>(c % 3);
      seq.compute_workers = ovl.compute_workers;
      ooc_solve(s.a, s.m, s.n, s.rhs, s.nrhs, seq, d1.path());
      ooc_solve(s.a, s.m, s.n, s.rhs, s.nrhs, ovl, d2.path());
      identical += same_tiles(d1 / "X", d2 / "X") ? 1 : 0;
    }
    return Outcome{identical == 20, fmt("%.0f of 20 cases bitwise identical", identical)};
  });

  report(6, "factorization write bound", [&] {
    std::mt19937_64 rng(20243);
    double worst_ratio = 0.0;
    std::size_t runs = 0;
    for (std::size_t g : {2u, 3u, 4u, 6u, 8u})
      for (std::size_t extra : {0u, 1u, 3u})
        for (std::size_t cache : {4u, 6u, 16u}) {
          TempDir d;
          const std::size_t b = 8, n = g * b, m = (g + extra) * b;
          auto a = TiledMatrix::create(m, n, b, d / "A");
          scatter(a, random_system(m, n, rng));
          RunReport rep;
          auto f = factorize(a, d / "F", small_engine(b, 4, cache), &rep);
          const double bound = kWriteFactor * double(f.qr.tile_count() + f.s.tile_count());
          worst_ratio = std::max(worst_ratio, double(rep.tiles_written) / bound);
          ++runs;
        }
    return Outcome{worst_ratio <= 1.0,
                   fmt("%.0f factorizations, max writes / (3 x tiles of A and S) = %.3f", double(runs), worst_ratio)};
  });

  report(7, "projector consistency", [&] {
    auto g = scaled_geometry(32);
    auto angles = angle_schedule(g.views);
    TempDir d;
    auto a = TiledMatrix::create(g.rows(), g.cols(), 256, d / "A");
    assemble_system_matrix(g, angles, a);
    auto dense = gather(a);
    std::mt19937_64 rng(20244);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_mv = 0.0;
    for (int t = 0; t < 10; ++t) {
      std::vector<double> img(g.cols());
      for (double& v : img) v = u(rng);
      auto ax = matmul(dense, img, g.rows(), g.cols(), 1);
      auto fp = forward_project(g, angles, img);
      worst_mv = std::max(worst_mv, frob_diff(ax, fp) / frob(fp));
    }
    double worst_chord = 0.0;
    std::uniform_int_distribution<std::size_t> pick_n(8, 128);
    for (int t = 0; t < 1000; ++t) {
      const std::size_t n = pick_n(rng);
      const double fov = 27.45, ps = fov / double(n);
      Ray r = random_ray(fov, rng);
      SparseRow row;
      joseph_ray(n, fov, r, row);
      worst_chord = std::max(worst_chord, std::abs(row.sum() - square_chord(fov, r)) / ps);
    }
    return Outcome{worst_mv <= kProjectorTol && worst_chord <= kChordTol,
                   fmt("matvec vs matrix-free worst %.3e (limit 1e-12); chord error worst %.3f px over 1000 rays (limit 1.5)",
                       worst_mv, worst_chord)};
  });

  report(8, "per-slice amortization at 64x64", [&] {
    if (!desk_ok) return Outcome{false, desk_error};
    auto cfg = desk_config(root / "desk");
    const auto g = cfg.scanner();
    const auto f = open_factors(cfg.factors_dir());
    const std::vector<std::size_t> counts = {8, 16, 32, 64};
    const Phantom ph = shepp_logan(g.fov());
    std::vector<double> per_slice;
    for (std::size_t s : counts) {
      auto ref = rasterize_stack(ph, g.n, g.fov(), s);
      auto sino = forward_project_stack(g, angle_schedule(g.views, g.interpretation), ref, s);
      const fs::path bdir = root / ("bench_B" + std::to_string(s));
      auto b = TiledMatrix::create(g.rows(), s, cfg.tile_size, bdir);
      scatter(b, sino);
      double best = 1e300;
      for (int rep = 0; rep < 3; ++rep) {
        RunReport run;
        solve(f, b, root / ("bench_X" + std::to_string(s)), cfg.engine(), &run);
        best = std::min(best, run.total_seconds / double(s));
      }
      per_slice.push_back(best);
    }
    int inversions = 0;
    bool small = true;
    for (std::size_t i = 1; i < per_slice.size(); ++i)
      if (per_slice[i] > per_slice[i - 1]) {
        ++inversions;
        small = small && per_slice[i] <= per_slice[i - 1] * (1.0 + kInversionTol);
      }
    std::ostringstream d;
    for (std::size_t i = 0; i < counts.size(); ++i)
      d << (i ? ", " : "") << counts[i] << ": " << per_slice[i] * 1e3 << " ms";
    d << "; inversions " << inversions;
    return Outcome{inversions == 0 || (inversions == 1 && small), "per-slice solve time " + d.str()};
  });

  report(9, "kernel numerics", [] {
    std::mt19937_64 rng(20245);
    std::uniform_int_distribution<std::size_t> pick_b(2, 64);
    double orth = 0.0, resid = 0.0;
    for (int t = 0; t < 100; ++t) {
      kernels::KernelConfig cfg;
      cfg.tile_size = pick_b(rng);
      cfg.inner_block = std::uniform_int_distribution<std::size_t>(1, cfg.tile_size)(rng);
      const std::size_t b = cfg.tile_size;
      auto dense = check_dense_qr(random_matrix(b, b, rng), cfg);
      auto td = check_td_qr(random_upper(b, rng), random_matrix(b, b, rng), cfg);
      orth = std::max({orth, dense.orthogonality, td.orthogonality});
      resid = std::max({resid, dense.residual, td.residual});
    }
    return Outcome{orth <= kKernelTol && resid <= kKernelTol,
                   fmt("100 dense + 100 TD tiles, worst orthogonality %.3e, worst residual %.3e (limit 1e-12)", orth,
                       resid)};
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
