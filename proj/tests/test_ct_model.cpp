#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "oocqr/errors.hpp"
#include "oocqr/geometry.hpp"
#include "oocqr/image_io.hpp"
#include "oocqr/phantom.hpp"
#include "oocqr/projector.hpp"
#include "oocqr/tile_store.hpp"
#include "support/ray_oracles.hpp"
#include "support/test_support.hpp"

using namespace oocqr;
using namespace testing;

TEST_CASE("table geometry dimensions") {
  auto g = full_geometry();
  CHECK(g.rows() == 266500);
  CHECK(g.cols() == 262144);
  CHECK(g.scan_radius == 75.0);
  CHECK(g.source_to_detector == 150.0);
  CHECK(g.fan_angle == 30.0);
  CHECK(g.fov() == doctest::Approx(2.0 * 75.0 * std::sin(15.0 * std::numbers::pi / 180.0) / std::sqrt(2.0)));
  CHECK_NOTHROW(g.validate());
}

TEST_CASE("scaled recipe") {
  auto g = scaled_geometry(64);
  CHECK(g.detectors == 129);
  CHECK(g.views == 40);
  CHECK(g.rows() == 5160);
  CHECK(g.views % 4 == 0);
  CHECK(g.rows() >= 1.2 * 64 * 64);
  CHECK((g.views - 4) * g.detectors < 1.2 * 64 * 64);
}

TEST_CASE("geometry validation") {
  auto g = scaled_geometry(16);
  auto bad = g;
  bad.fan_angle = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = g;
  bad.source_to_detector = bad.scan_radius;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = g;
  bad.views = 6;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = g;
  bad.views = 4;
  bad.detectors = 3;  // 12 rows for 256 unknowns
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = g;
  bad.field_of_view = 2.0 * g.scan_radius;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("geometry hash tracks matrix-relevant parameters") {
  auto g = scaled_geometry(32);
  auto h = g.hash();
  CHECK(h.size() == 16);
  CHECK(g.hash() == h);
  auto g2 = g;
  g2.views += 4;
  CHECK(g2.hash() != h);
  g2 = g;
  g2.interpretation = AngleInterpretation::literal;
  CHECK(g2.hash() != h);
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("angle schedule examples") {
  auto a = angle_schedule(260);
  REQUIRE(a.size() == 260);
  CHECK(a[0] == 0.0);
  CHECK(a[65] == doctest::Approx(90.5).epsilon(1e-12));
  auto lit = angle_schedule(4, AngleInterpretation::literal);
  CHECK(lit[0] == 0.0);
  CHECK(lit[1] == doctest::Approx(90.5).epsilon(1e-12));
  CHECK_THROWS(angle_schedule(10));
  CHECK(parse_interpretation("uniform-shift") == AngleInterpretation::uniform_shift);
  CHECK_THROWS_AS(parse_interpretation("round"), ConfigError);
}

TEST_CASE("angle schedules stay in range and distinct") {
  for (auto interp : {AngleInterpretation::uniform_shift, AngleInterpretation::literal})
    for (std::size_t v : {4u, 8u, 40u, 260u}) {
      auto a = angle_schedule(v, interp);
      std::set<double> seen(a.begin(), a.end());
      CHECK(seen.size() == v);
      for (double t : a) {
        CHECK(t >= 0.0);
        CHECK(t < 360.0);
      }
    }
  // The default keeps every quadrant covered.
  auto a = angle_schedule(260);
  for (int q = 0; q < 4; ++q)
    CHECK(std::count_if(a.begin(), a.end(), [&](double t) { return t >= 90.0 * q && t < 90.0 * (q + 1); }) >= 60);
}

TEST_CASE("axis-aligned ray through a pixel-centre row") {
  const std::size_t n = 16;
  const double fov = 8.0, ps = fov / n;
  SparseRow row;
  joseph_ray(n, fov, Ray{-50.0, 1.5 * ps, 1.0, 0.0}, row);
  REQUIRE(row.size() == n);
  for (double w : row.weight) CHECK(w == doctest::Approx(ps).epsilon(1e-12));
  CHECK(row.sum() == doctest::Approx(n * ps).epsilon(1e-12));
  std::set<std::uint32_t> rows;
  for (auto i : row.index) rows.insert(i / n);
  CHECK(rows == std::set<std::uint32_t>{static_cast<std::uint32_t>(n / 2 - 2)});
}

TEST_CASE("rays that miss the image give empty rows") {
  SparseRow row;
  joseph_ray(16, 8.0, Ray{-50.0, 10.0, 1.0, 0.0}, row);
  CHECK(row.size() == 0);
  joseph_ray(16, 8.0, Ray{-50.0, 0.3, -1.0, 0.0}, row);  // pointing away
  CHECK(row.size() == 0);
}

TEST_CASE("a source inside the image square is rejected") {
  SparseRow row;
  CHECK_THROWS_AS(joseph_ray(16, 8.0, Ray{0.5, 0.5, 1.0, 0.0}, row), std::domain_error);
  CHECK_THROWS_AS(joseph_ray(16, 8.0, Ray{-50.0, 0.0, 0.0, 0.0}, row), std::domain_error);
}

TEST_CASE("property: weights are nonnegative and track the chord") {
  std::mt19937_64 rng(51);
  for (std::size_t n : {8u, 31u, 64u}) {
    const double fov = 10.0, ps = fov / n;
    for (int t = 0; t < 300; ++t) {
      Ray r = random_ray(fov, rng);
      SparseRow row;
      joseph_ray(n, fov, r, row);
      for (double w : row.weight) CHECK(w >= 0.0);
      const double chord = square_chord(fov, r);
      CHECK(std::abs(row.sum() - chord) <= 1.5 * ps);
      CHECK(row.sum() <= std::sqrt(2.0) * fov + 2.0 * ps);
      std::set<std::uint32_t> unique(row.index.begin(), row.index.end());
      CHECK(unique.size() == row.size());
      for (auto i : row.index) CHECK(i < n * n);
    }
  }
}

TEST_CASE("detector rays leave the source and fan across the image") {
  auto g = scaled_geometry(32);
  auto angles = angle_schedule(g.views);
  for (std::size_t v : {std::size_t{0}, g.views / 3}) {
    auto left = detector_ray(g, angles[v], 0);
    auto mid = detector_ray(g, angles[v], g.detectors / 2);
    auto right = detector_ray(g, angles[v], g.detectors - 1);
    CHECK(std::hypot(mid.sx, mid.sy) == doctest::Approx(g.scan_radius));
    CHECK(std::hypot(mid.dx, mid.dy) == doctest::Approx(1.0));
    // central ray passes through the origin
    CHECK(std::abs(mid.sx * mid.dy - mid.sy * mid.dx) <= 1e-9);
    const double spread = std::acos(left.dx * right.dx + left.dy * right.dy) * 180.0 / std::numbers::pi;
    const double edge = (static_cast<double>(g.detectors) - 1.0) / static_cast<double>(g.detectors) *
                        std::tan(g.fan_angle / 2.0 * std::numbers::pi / 180.0);
    CHECK(spread == doctest::Approx(2.0 * std::atan(edge) * 180.0 / std::numbers::pi).epsilon(1e-9));
  }
}

TEST_CASE("assembled matrix agrees with the matrix-free projector") {
  TempDir d;
  auto g = scaled_geometry(16);
  auto angles = angle_schedule(g.views);
  const std::size_t b = 64;
  auto a = TiledMatrix::create(g.rows(), g.cols(), b, d / "A");
  assemble_system_matrix(g, angles, a);
  auto dense = gather(a);
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 5; ++t) {
    std::vector<double> img(g.cols());
    for (double& v : img) v = u(rng);
    auto ax = matmul(dense, img, g.rows(), g.cols(), 1);
    auto fp = forward_project(g, angles, img);
    CHECK(frob_diff(ax, fp) <= 1e-12 * frob(fp));
  }
  std::vector<double> zero(g.cols(), 0.0);
  auto z = forward_project(g, angles, zero);
  CHECK(std::all_of(z.begin(), z.end(), [](double v) { return v == 0.0; }));
  // matrix rows equal joseph_row
  auto r = joseph_row(g, angles, 3, 7);
  const std::size_t row = 3 * g.detectors + 7;
  double s = 0.0;
  for (std::size_t c = 0; c < g.cols(); ++c) s += dense[row + c * g.rows()];
  CHECK(s == doctest::Approx(r.sum()).epsilon(1e-14));
}

// Rays passing within one pixel of the rim are skipped: pixel-centre
// sampling moves the rim by up to half a pixel, and near tangency the chord
// changes by about sqrt(rho * pixel_size) over that distance.
TEST_CASE("forward projection of a disk follows its chords") {
  for (std::size_t n : {32u, 64u, 128u})
    for (double frac : {0.2, 0.35, 0.45}) {
      auto g = scaled_geometry(n);
      auto angles = angle_schedule(g.views);
      const double rho = frac * g.fov(), ps = g.pixel_size();
      Phantom disk{{Ellipse{0.0, 0.0, rho, rho, 0.0, 1.0}}};
      auto sino = forward_project(g, angles, rasterize(disk, g.n, g.fov()));
      std::size_t checked = 0;
      for (std::size_t v = 0; v < g.views; ++v)
        for (std::size_t det = 0; det < g.detectors; ++det) {
          auto ray = detector_ray(g, angles[v], det);
          const double dist = std::abs(ray.sx * ray.dy - ray.sy * ray.dx);
          if (std::abs(dist - rho) < ps) continue;
          ++checked;
          CHECK(std::abs(sino[v * g.detectors + det] - disk_chord(rho, ray)) <= 2.0 * ps);
        }
      CHECK(checked > g.rows() * 9 / 10);
    }
}

TEST_CASE("forward projection is linear") {
  auto g = scaled_geometry(16);
  auto angles = angle_schedule(g.views);
  std::mt19937_64 rng(53);
  auto x1 = random_matrix(g.cols(), 1, rng), x2 = random_matrix(g.cols(), 1, rng);
  const double alpha = -1.75;
  std::vector<double> mix(g.cols());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = alpha * x1[i] + x2[i];
  auto p1 = forward_project(g, angles, x1), p2 = forward_project(g, angles, x2);
  auto pm = forward_project(g, angles, mix);
  std::vector<double> expect(pm.size());
  for (std::size_t i = 0; i < pm.size(); ++i) expect[i] = alpha * p1[i] + p2[i];
  CHECK(frob_diff(pm, expect) <= 1e-12 * frob(expect));
  std::vector<double> both(2 * g.cols());
  std::copy(x1.begin(), x1.end(), both.begin());
  std::copy(x2.begin(), x2.end(), both.begin() + g.cols());
  auto stack = forward_project_stack(g, angles, both, 2);
  CHECK(std::equal(p1.begin(), p1.end(), stack.begin()));
  CHECK(std::equal(p2.begin(), p2.end(), stack.begin() + g.rows()));
}

TEST_CASE("phantom rasterization") {
  const std::size_t n = 64;
  const double fov = 12.0, ps = fov / n;
  CHECK(std::all_of(rasterize(Phantom{}, n, fov).begin(), rasterize(Phantom{}, n, fov).end(),
                    [](double v) { return v == 0.0; }));
  const double r = fov / 2.0;
  auto img = rasterize(Phantom{{Ellipse{0, 0, r, r, 0, 1.0}}}, n, fov);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double x = -fov / 2 + (j + 0.5) * ps, y = fov / 2 - (i + 0.5) * ps;
      inside += x * x + y * y <= r * r;
    }
  CHECK(static_cast<std::size_t>(std::count(img.begin(), img.end(), 1.0)) == inside);

  Phantom two{{Ellipse{-1, 0, 2, 1, 0, 1.0}, Ellipse{1, 0, 2, 1, 0, 0.5}}};
  auto overlap = rasterize(two, n, fov);
  CHECK(two.density_at(0.0, 0.0) == 1.5);
  CHECK(std::count(overlap.begin(), overlap.end(), 1.5) > 0);
  // row 0 is the top: an ellipse centred high up lights the upper rows only
  auto top = rasterize(Phantom{{Ellipse{0, 4, 1, 1, 0, 1.0}}}, n, fov);
  CHECK(top[(n / 6) * n + n / 2] == 1.0);
  CHECK(top[(5 * n / 6) * n + n / 2] == 0.0);
  // rotation
  Phantom rot{{Ellipse{0, 0, 4, 1, 90, 1.0}}};
  CHECK(rot.density_at(0.0, 3.0) == 1.0);
  CHECK(rot.density_at(3.0, 0.0) == 0.0);
}

TEST_CASE("Shepp-Logan stack") {
  auto p = shepp_logan(10.0);
  CHECK(p.ellipses.size() == 10);
  CHECK(p.density_at(0.0, 0.0) > 0.0);
  CHECK(p.density_at(5.0, 5.0) == 0.0);
  auto stack = rasterize_stack(p, 16, 10.0, 4);
  CHECK(stack.size() == 16 * 16 * 4);
  auto s0 = std::vector<double>(stack.begin(), stack.begin() + 256);
  auto s1 = std::vector<double>(stack.begin() + 256, stack.begin() + 512);
  CHECK(s0 != s1);
  auto mid = phantom_slice(p, 0, 1);
  CHECK(mid.ellipses[0].a == doctest::Approx(p.ellipses[0].a));
}

TEST_CASE("phantom files round-trip") {
  TempDir d;
  auto p = shepp_logan(12.0);
  save_phantom(p, d / "p.txt");
  auto q = load_phantom(d / "p.txt");
  REQUIRE(q.ellipses.size() == p.ellipses.size());
  for (std::size_t i = 0; i < p.ellipses.size(); ++i) {
    CHECK(q.ellipses[i].cx == doctest::Approx(p.ellipses[i].cx).epsilon(1e-15));
    CHECK(q.ellipses[i].density == doctest::Approx(p.ellipses[i].density).epsilon(1e-15));
  }
  std::ofstream(d / "bad.txt") << "# comment\n1 2 3\n";
  CHECK_THROWS_AS(load_phantom(d / "bad.txt"), FormatError);
}

TEST_CASE("PGM ingestion") {
  TempDir d;
  {
    std::ofstream f(d / "one.pgm", std::ios::binary);
    f << "P5\n2 2\n65535\n";
    const unsigned char px[8] = {0, 0, 0xff, 0xff, 0, 0, 0, 0};
    f.write(reinterpret_cast<const char*>(px), 8);
  }
  std::size_t n = 0;
  auto img = ingest_image(d / "one.pgm", &n);
  CHECK(n == 2);
  CHECK(img == std::vector<double>{0.0, 1.0, 0.0, 0.0});

  std::vector<double> zeros(9, 0.0);
  write_pgm(d / "z.pgm", zeros, 3, 3);
  auto z = ingest_image(d / "z.pgm");
  CHECK(z == zeros);

  std::mt19937_64 rng(54);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> px(32 * 32);
  for (double& v : px) v = u(rng);
  write_pgm(d / "r.pgm", px, 32, 32, 16);
  auto back = ingest_image(d / "r.pgm");
  for (std::size_t i = 0; i < px.size(); ++i) CHECK(std::abs(back[i] - px[i]) <= 0.5 / 65535.0 + 1e-15);

  write_pgm(d / "wide.pgm", px, 64, 16, 8);
  CHECK(read_pgm(d / "wide.pgm").width == 64);
  CHECK_THROWS_AS(ingest_image(d / "wide.pgm"), FormatError);
  std::ofstream(d / "junk.pgm") << "P2\n1 1\n255\n0\n";
  CHECK_THROWS_AS(read_pgm(d / "junk.pgm"), FormatError);
}

TEST_CASE("raw arrays round-trip bit for bit") {
  TempDir d;
  std::vector<double> v = {1.0, -0.0, 1e-300, std::numeric_limits<double>::max()};
  write_raw(d / "v.raw", v);
  CHECK(read_raw(d / "v.raw") == v);
}
