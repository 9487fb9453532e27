#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "oocqr/engine.hpp"
#include "oocqr/geometry.hpp"

namespace oocqr {

/// Everything the pipeline commands need. Defaults reproduce the full-size
/// scanner (512^2 image, 1025 detectors, 260 views) with 10240-element tiles,
/// inner block 128 and a 32 GiB cache.
struct PipelineConfig {
  /// "full": geometry fields as given; "scaled": detectors = 2n+1 and views
  /// derived from `overdetermination` unless set explicitly.
  std::string geometry = "full";
  std::size_t n = 512;
  double scan_radius = 75.0;
  double source_to_detector = 150.0;
  double fan_angle = 30.0;
  std::optional<std::size_t> detectors;
  std::optional<std::size_t> views;
  double field_of_view = 0.0;
  double overdetermination = 1.2;
  AngleInterpretation interpretation = AngleInterpretation::uniform_shift;

  /// 0 means n/2.
  std::size_t slices = 0;
  std::size_t tile_size = 10240;
  std::size_t inner_block = 128;
  std::uint64_t cache_budget = 32ull << 30;
  Mode mode = Mode::overlapped;
  unsigned compute_workers = 1;
  std::size_t prefetch_depth = 2;
  /// "auto", "scalar" or "avx2".
  std::string simd = "auto";

  /// Empty: built-in head phantom.
  std::filesystem::path phantom;
  /// Optional square PGM used as the single reference slice instead of the phantom.
  std::filesystem::path image;
  std::filesystem::path work_dir = "oocqr_work";
  std::vector<std::size_t> bench_slices = {8, 16, 32, 64};
  std::size_t ssim_window = 8;

  ScannerGeometry scanner() const;
  EngineConfig engine() const;
  std::size_t slice_count() const { return slices ? slices : std::max<std::size_t>(1, n / 2); }

  std::filesystem::path matrix_dir() const { return work_dir / "A"; }
  std::filesystem::path factors_dir() const { return work_dir / "factors"; }
  std::filesystem::path sinogram_dir() const { return work_dir / "B"; }
  std::filesystem::path reference_dir() const { return work_dir / "reference"; }
  std::filesystem::path solution_dir() const { return work_dir / "X"; }
  std::filesystem::path output_dir() const { return work_dir / "out"; }

  /// Applies one key=value setting; throws ConfigError naming the key.
  void set(const std::string& key, const std::string& value);
  void validate() const;
};

/// Parses key=value lines ('#' comments, blank lines allowed). Unknown keys
/// and malformed values are rejected with the line number.
PipelineConfig parse_config(const std::string& text, const std::string& origin = "<config>");
PipelineConfig load_config(const std::filesystem::path& path);

/// Accepts plain byte counts and K/M/G/T (binary) suffixes, e.g. "32G".
std::uint64_t parse_bytes(const std::string& s);

}  // namespace oocqr
