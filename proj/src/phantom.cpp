#include "oocqr/phantom.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include "oocqr/errors.hpp"

namespace oocqr {

double Phantom::density_at(double x, double y) const {
  double d = 0.0;
  for (const Ellipse& e : ellipses) {
    if (e.a <= 0.0 || e.b <= 0.0) continue;
    const double t = e.theta * std::numbers::pi / 180.0;
    const double c = std::cos(t), s = std::sin(t);
    const double u = (x - e.cx) * c + (y - e.cy) * s;
    const double v = -(x - e.cx) * s + (y - e.cy) * c;
    if ((u * u) / (e.a * e.a) + (v * v) / (e.b * e.b) <= 1.0) d += e.density;
  }
  return d;
}

Phantom shepp_logan(double fov) {
  // Unit-disc coordinates: density, a, b, cx, cy, theta.
  static const double table[10][6] = {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},         {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
      {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},     {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
      {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},        {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
      {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},      {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
      {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},    {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
  };
  const double r = fov / 2.0;
  Phantom p;
  for (const auto& row : table)
    p.ellipses.push_back(Ellipse{row[3] * r, row[4] * r, row[1] * r, row[2] * r, row[5], row[0]});
  return p;
}

Phantom load_phantom(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open phantom file " + path.string());
  Phantom p;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    Ellipse e;
    std::string extra;
    if (!(ls >> e.cx >> e.cy >> e.a >> e.b >> e.theta >> e.density) || (ls >> extra))
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected 'cx cy a b theta density'");
    p.ellipses.push_back(e);
  }
  return p;
}

void save_phantom(const Phantom& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write phantom file " + path.string());
  out << "# cx cy a b theta density\n" << std::setprecision(17);
  for (const Ellipse& e : p.ellipses)
    out << e.cx << ' ' << e.cy << ' ' << e.a << ' ' << e.b << ' ' << e.theta << ' ' << e.density
        << '\n';
  if (!out) throw IoError("failed writing phantom file " + path.string());
}

std::vector<double> rasterize(const Phantom& p, std::size_t n, double fov) {
  std::vector<double> img(n * n);
  const double ps = fov / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double y = fov / 2.0 - (static_cast<double>(r) + 0.5) * ps;
    for (std::size_t c = 0; c < n; ++c) {
      const double x = -fov / 2.0 + (static_cast<double>(c) + 0.5) * ps;
      img[r * n + c] = p.density_at(x, y);
    }
  }
  return img;
}

Phantom phantom_slice(const Phantom& p, std::size_t s, std::size_t slices) {
  if (slices == 0 || s >= slices) throw std::out_of_range("slice index outside the stack");
  const double z = 0.8 * ((2.0 * static_cast<double>(s) + 1.0) / static_cast<double>(slices) - 1.0);
  const double k = std::sqrt(1.0 - z * z);
  Phantom out = p;
  for (Ellipse& e : out.ellipses) {
    e.a *= k;
    e.b *= k;
  }
  return out;
}

std::vector<double> rasterize_stack(const Phantom& p, std::size_t n, double fov, std::size_t slices) {
  std::vector<double> stack;
  stack.reserve(n * n * slices);
  for (std::size_t s = 0; s < slices; ++s) {
    auto img = rasterize(phantom_slice(p, s, slices), n, fov);
    stack.insert(stack.end(), img.begin(), img.end());
  }
  return stack;
}

}  // namespace oocqr
