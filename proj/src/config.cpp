#include "oocqr/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "oocqr/errors.hpp"
#include "oocqr/simd.hpp"

namespace oocqr {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

}  // namespace

std::uint64_t parse_bytes(const std::string& s) {
  std::string v = trim(s);
  if (v.empty()) throw ConfigError("empty byte count");
  std::uint64_t mult = 1;
  char last = static_cast<char>(std::toupper(static_cast<unsigned char>(v.back())));
  if (last == 'B' && v.size() > 1) {
    v.pop_back();
    last = static_cast<char>(std::toupper(static_cast<unsigned char>(v.back())));
  }
  switch (last) {
    case 'K': mult = 1ull << 10; break;
    case 'M': mult = 1ull << 20; break;
    case 'G': mult = 1ull << 30; break;
    case 'T': mult = 1ull << 40; break;
    default: break;
  }
  if (mult != 1) v.pop_back();
  std::uint64_t n = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ConfigError("malformed byte count '" + s + "'");
  return n * mult;
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  const std::string& v = value;
  if (key == "geometry") {
    if (v != "full" && v != "scaled") throw ConfigError("key 'geometry': expected full or scaled");
    geometry = v;
  } else if (key == "n") {
    n = to_size(key, v);
  } else if (key == "scan_radius") {
    scan_radius = to_double(key, v);
  } else if (key == "source_to_detector") {
    source_to_detector = to_double(key, v);
  } else if (key == "fan_angle") {
    fan_angle = to_double(key, v);
  } else if (key == "detectors") {
    detectors = to_size(key, v);
  } else if (key == "views") {
    views = to_size(key, v);
  } else if (key == "field_of_view") {
    field_of_view = to_double(key, v);
  } else if (key == "overdetermination") {
    overdetermination = to_double(key, v);
  } else if (key == "interpretation") {
    interpretation = parse_interpretation(v);
  } else if (key == "slices") {
    slices = to_size(key, v);
  } else if (key == "tile_size") {
    tile_size = to_size(key, v);
  } else if (key == "inner_block") {
    inner_block = to_size(key, v);
  } else if (key == "cache_budget") {
    cache_budget = parse_bytes(v);
  } else if (key == "mode") {
    mode = parse_mode(v);
  } else if (key == "compute_workers") {
    compute_workers = static_cast<unsigned>(to_size(key, v));
  } else if (key == "prefetch_depth") {
    prefetch_depth = to_size(key, v);
  } else if (key == "simd") {
    if (v != "auto" && v != "scalar" && v != "avx2")
      throw ConfigError("key 'simd': expected auto, scalar or avx2");
    simd = v;
  } else if (key == "phantom") {
    phantom = v;
  } else if (key == "image") {
    image = v;
  } else if (key == "work_dir") {
    work_dir = v;
  } else if (key == "bench_slices") {
    bench_slices.clear();
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) bench_slices.push_back(to_size(key, trim(item)));
    if (bench_slices.empty()) throw ConfigError("key 'bench_slices': empty list");
  } else if (key == "ssim_window") {
    ssim_window = to_size(key, v);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

ScannerGeometry PipelineConfig::scanner() const {
  ScannerGeometry g = geometry == "scaled" ? scaled_geometry(n, overdetermination) : full_geometry();
  g.n = n;
  g.scan_radius = scan_radius;
  g.source_to_detector = source_to_detector;
  g.fan_angle = fan_angle;
  g.field_of_view = field_of_view;
  g.interpretation = interpretation;
  if (detectors) g.detectors = *detectors;
  if (views) g.views = *views;
  return g;
}

EngineConfig PipelineConfig::engine() const {
  EngineConfig e;
  e.tile_size = tile_size;
  e.inner_block = std::min(inner_block, tile_size);
  e.cache_budget_bytes = cache_budget;
  e.mode = mode;
  e.compute_workers = compute_workers;
  e.io_agents = 1;
  e.prefetch_depth = prefetch_depth;
  if (simd != "auto") {
    try {
      e.prims = &simd::select(simd::parse_level(simd));
    } catch (const std::runtime_error& err) {
      throw ConfigError(std::string("key 'simd': ") + err.what());
    }
  }
  return e;
}

void PipelineConfig::validate() const {
  if (n < 8) throw ConfigError("n must be at least 8");
  scanner().validate();
  if (ssim_window == 0 || ssim_window > n) throw ConfigError("ssim_window must be in 1..n");
  for (std::size_t s : bench_slices)
    if (s == 0) throw ConfigError("bench_slices entries must be positive");
  engine().validate();
}

PipelineConfig parse_config(const std::string& text, const std::string& origin) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

}  // namespace oocqr
