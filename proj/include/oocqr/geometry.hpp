#pragma once

// Fan-beam scanner model. The source travels on a circle of radius
// scan_radius around the image centre; a flat detector of `detectors`
// equispaced cells, spanning the fan angle, sits source_to_detector away from
// the source on the opposite side. The image is an n x n pixel square of side
// field_of_view centred at the origin, pixels in row-major order, row 0 at the
// top (+y), column 0 at the left (-x).

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace oocqr {

enum class AngleInterpretation { uniform_shift, literal };

const char* interpretation_name(AngleInterpretation i);
/// Accepts "uniform_shift"/"uniform-shift" and "literal".
AngleInterpretation parse_interpretation(const std::string& s);

struct ScannerGeometry {
  double scan_radius = 75.0;         // cm
  double source_to_detector = 150.0;  // cm
  double fan_angle = 30.0;            // degrees
  std::size_t detectors = 1025;
  std::size_t views = 260;
  std::size_t n = 512;
  /// Side of the image square in cm; 0 selects the default, the square
  /// inscribed in the circle the fan covers (radius scan_radius*sin(fan/2)).
  double field_of_view = 0.0;
  AngleInterpretation interpretation = AngleInterpretation::uniform_shift;

  std::size_t rows() const { return detectors * views; }
  std::size_t cols() const { return n * n; }
  double fov() const;
  double pixel_size() const { return fov() / static_cast<double>(n); }
  double detector_pitch() const;

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
  /// Canonical text of every parameter that changes the system matrix.
  std::string canonical() const;
  /// FNV-1a 64 of canonical(), as 16 hex digits.
  std::string hash() const;
};

ScannerGeometry full_geometry();

/// Desk-scale recipe for an n x n image: detectors = 2n+1 and views the
/// smallest multiple of 4 with detectors*views >= overdetermination*n^2.
ScannerGeometry scaled_geometry(std::size_t n, double overdetermination = 1.2);

/// View angles in degrees, in [0, 360). v must be a multiple of 4.
std::vector<double> angle_schedule(std::size_t v,
                                   AngleInterpretation interp = AngleInterpretation::uniform_shift);

struct Ray {
  double sx = 0.0, sy = 0.0;  // source position, cm
  double dx = 0.0, dy = 0.0;  // unit direction
};

/// Ray from the source at view angle `angle_deg` to the centre of detector cell `detector`.
Ray detector_ray(const ScannerGeometry& g, double angle_deg, std::size_t detector);

std::uint64_t fnv1a64(const std::string& s);

}  // namespace oocqr
