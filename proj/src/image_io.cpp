#include "oocqr/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "oocqr/errors.hpp"

namespace oocqr {

namespace {

static_assert(std::endian::native == std::endian::little, "raw files assume a little-endian host");

// Next header token, skipping whitespace and '#' comments.
std::string header_token(std::istream& in, const std::string& where) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw FormatError(where + ": truncated PGM header");
  return tok;
}

std::size_t header_number(std::istream& in, const std::string& where) {
  std::string tok = header_token(in, where);
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
    throw FormatError(where + ": malformed PGM header field '" + tok + "'");
  return std::stoul(tok);
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + where);
  if (header_token(in, where) != "P5") throw FormatError(where + ": not a binary PGM (P5)");
  GrayImage img;
  img.width = header_number(in, where);
  img.height = header_number(in, where);
  const std::size_t maxval = header_number(in, where);
  if (img.width == 0 || img.height == 0) throw FormatError(where + ": empty image");
  if (maxval == 0 || maxval > 65535) throw FormatError(where + ": maxval outside 1..65535");
  const std::size_t count = img.width * img.height;
  const std::size_t bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(count * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw FormatError(where + ": pixel data shorter than header says");
  img.pixels.resize(count);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t v = bytes == 2 ? (std::size_t{raw[2 * i]} << 8) | raw[2 * i + 1] : raw[i];
    if (v > maxval) throw FormatError(where + ": pixel value above maxval");
    img.pixels[i] = static_cast<double>(v) * scale;
  }
  return img;
}

std::vector<double> ingest_image(const std::filesystem::path& path, std::size_t* n) {
  GrayImage img = read_pgm(path);
  if (img.width != img.height)
    throw FormatError(path.string() + ": image is " + std::to_string(img.width) + "x" +
                      std::to_string(img.height) + ", expected square");
  if (n) *n = img.width;
  return std::move(img.pixels);
}

void write_pgm(const std::filesystem::path& path, std::span<const double> pixels, std::size_t width,
               std::size_t height, int bits, double lo, double hi) {
  if (pixels.size() != width * height) throw std::invalid_argument("write_pgm: size mismatch");
  if (bits != 8 && bits != 16) throw std::invalid_argument("write_pgm: bits must be 8 or 16");
  if (!(hi > lo)) throw std::invalid_argument("write_pgm: empty value range");
  const unsigned maxval = bits == 16 ? 65535u : 255u;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image " + path.string());
  out << "P5\n" << width << ' ' << height << '\n' << maxval << '\n';
  std::vector<unsigned char> raw;
  raw.reserve(pixels.size() * (bits / 8));
  for (double v : pixels) {
    double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
    if (!std::isfinite(t)) t = 0.0;
    auto q = static_cast<unsigned>(std::lround(t * maxval));
    if (bits == 16) raw.push_back(static_cast<unsigned char>(q >> 8));
    raw.push_back(static_cast<unsigned char>(q & 0xff));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing image " + path.string());
}

void write_raw(const std::filesystem::path& path, std::span<const double> data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<double> read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  if (size % sizeof(double) != 0) throw FormatError(path.string() + ": size is not a multiple of 8");
  std::vector<double> data(size / sizeof(double));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size));
  if (!in) throw IoError("failed reading " + path.string());
  return data;
}

}  // namespace oocqr
