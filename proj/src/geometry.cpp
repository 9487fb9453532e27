#include "oocqr/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "oocqr/errors.hpp"

namespace oocqr {

namespace {
double radians(double deg) { return deg * std::numbers::pi / 180.0; }
}  // namespace

const char* interpretation_name(AngleInterpretation i) {
  return i == AngleInterpretation::uniform_shift ? "uniform_shift" : "literal";
}

AngleInterpretation parse_interpretation(const std::string& s) {
  if (s == "uniform_shift" || s == "uniform-shift") return AngleInterpretation::uniform_shift;
  if (s == "literal") return AngleInterpretation::literal;
  throw ConfigError("unknown angle interpretation '" + s + "' (expected uniform-shift or literal)");
}

double ScannerGeometry::fov() const {
  if (field_of_view > 0.0) return field_of_view;
  return 2.0 * scan_radius * std::sin(radians(fan_angle / 2.0)) / std::sqrt(2.0);
}

double ScannerGeometry::detector_pitch() const {
  return 2.0 * source_to_detector * std::tan(radians(fan_angle / 2.0)) /
         static_cast<double>(detectors);
}

void ScannerGeometry::validate() const {
  if (!(scan_radius > 0.0)) throw ConfigError("scan_radius must be positive");
  if (!(source_to_detector > scan_radius))
    throw ConfigError("source_to_detector must exceed scan_radius");
  if (!(fan_angle > 0.0 && fan_angle < 180.0)) throw ConfigError("fan_angle must be in (0, 180)");
  if (detectors == 0 || n == 0) throw ConfigError("detectors and n must be positive");
  if (views == 0 || views % 4 != 0) throw ConfigError("views must be a positive multiple of 4");
  if (field_of_view < 0.0) throw ConfigError("field_of_view must be non-negative");
  if (rows() < cols())
    throw ConfigError("detectors*views (" + std::to_string(rows()) + ") must be >= n^2 (" +
                      std::to_string(cols()) + ")");
  if (fov() / std::sqrt(2.0) >= scan_radius)
    throw ConfigError("image square does not fit inside the scan circle");
}

std::string ScannerGeometry::canonical() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "scan_radius=%.17g;source_to_detector=%.17g;fan_angle=%.17g;detectors=%zu;"
                "views=%zu;n=%zu;field_of_view=%.17g;interpretation=%s",
                scan_radius, source_to_detector, fan_angle, detectors, views, n, fov(),
                interpretation_name(interpretation));
  return buf;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string ScannerGeometry::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical())));
  return buf;
}

ScannerGeometry full_geometry() { return ScannerGeometry{}; }

ScannerGeometry scaled_geometry(std::size_t n, double overdetermination) {
  if (n == 0) throw ConfigError("n must be positive");
  if (!(overdetermination >= 1.0)) throw ConfigError("overdetermination must be >= 1");
  ScannerGeometry g;
  g.n = n;
  g.detectors = 2 * n + 1;
  const double need = overdetermination * static_cast<double>(n) * static_cast<double>(n);
  g.views = 4;
  while (static_cast<double>(g.detectors * g.views) < need) g.views += 4;
  return g;
}

std::vector<double> angle_schedule(std::size_t v, AngleInterpretation interp) {
  if (v == 0 || v % 4 != 0) throw ConfigError("number of views must be a positive multiple of 4");
  const double step = 360.0 / static_cast<double>(v);
  const std::size_t q = v / 4;
  std::vector<double> theta(v);
  for (std::size_t i = 1; i <= v; ++i) {
    const double base = step * static_cast<double>(i - 1);
    double t;
    if (interp == AngleInterpretation::uniform_shift) {
      double shift = i <= q ? 0.0 : i <= 2 * q ? 0.5 : i <= 3 * q ? -0.25 : -0.5;
      t = base + shift;
    } else if (i <= q) {
      t = base;
    } else if (i <= 2 * q) {
      t = theta[q - 1] + 0.5 + base;
    } else if (i <= 3 * q) {
      t = theta[2 * q - 1] - 0.75 + base;
    } else {
      t = theta[3 * q - 1] - 0.25 + base;
    }
    t = std::fmod(t, 360.0);
    if (t < 0.0) t += 360.0;
    theta[i - 1] = t;
  }
  return theta;
}

Ray detector_ray(const ScannerGeometry& g, double angle_deg, std::size_t detector) {
  const double th = radians(angle_deg);
  const double c = std::cos(th), s = std::sin(th);
  const double sx = g.scan_radius * c, sy = g.scan_radius * s;
  const double t = (static_cast<double>(detector) - (static_cast<double>(g.detectors) - 1.0) / 2.0) *
                   g.detector_pitch();
  const double px = sx - g.source_to_detector * c - t * s;
  const double py = sy - g.source_to_detector * s + t * c;
  double dx = px - sx, dy = py - sy;
  const double len = std::hypot(dx, dy);
  return Ray{sx, sy, dx / len, dy / len};
}

}  // namespace oocqr
