#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace oocqr {

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;  // row-major, scaled to [0, 1] by the file's maxval
};

/// Binary PGM (P5), 8- or 16-bit.
GrayImage read_pgm(const std::filesystem::path& path);
/// Square binary PGM as a row-major n x n image in [0, 1]. Throws FormatError
/// on non-square input.
std::vector<double> ingest_image(const std::filesystem::path& path, std::size_t* n = nullptr);

/// Writes a row-major image as P5. Values are mapped linearly from [lo, hi]
/// to [0, maxval] and clamped; maxval is 255 or 65535 depending on `bits`.
void write_pgm(const std::filesystem::path& path, std::span<const double> pixels, std::size_t width,
               std::size_t height, int bits = 16, double lo = 0.0, double hi = 1.0);

/// Raw little-endian float64 arrays (column stacks of images or sinograms).
void write_raw(const std::filesystem::path& path, std::span<const double> data);
std::vector<double> read_raw(const std::filesystem::path& path);

}  // namespace oocqr
