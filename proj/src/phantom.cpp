#include "superct/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "superct/error.hpp"

namespace superct {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

bool Ellipse::contains(double x, double y) const {
  const double c = std::cos(phi), s = std::sin(phi);
  const double dx = x - x0, dy = y - y0;
  const double u = (dx * c + dy * s) / a;
  const double v = (-dx * s + dy * c) / b;
  return u * u + v * v <= 1.0;
}

std::vector<Ellipse> shepp_logan_ellipses() {
  return {
      {0.0, 0.0, 0.69, 0.92, 0.0, 2.0},
      {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98},
      {0.22, 0.0, 0.11, 0.31, -18.0 * kDeg, -0.02},
      {-0.22, 0.0, 0.16, 0.41, 18.0 * kDeg, -0.02},
      {0.0, 0.35, 0.21, 0.25, 0.0, 0.01},
      {0.0, 0.1, 0.046, 0.046, 0.0, 0.01},
      {0.0, -0.1, 0.046, 0.046, 0.0, 0.01},
      {-0.08, -0.605, 0.046, 0.023, 0.0, 0.01},
      {0.0, -0.606, 0.023, 0.023, 0.0, 0.01},
      {0.06, -0.605, 0.023, 0.046, 0.0, 0.01},
  };
}

Image render_ellipses(const std::vector<Ellipse>& ellipses, int rows, int cols, double mu_water) {
  Image img(rows, cols, mu_water);
  for (int r = 0; r < rows; ++r) {
    const double y = (0.5 * (rows - 1) - r) / (0.5 * rows);
    for (int c = 0; c < cols; ++c) {
      const double x = (c - 0.5 * (cols - 1)) / (0.5 * cols);
      double v = 0.0;
      for (const auto& e : ellipses) {
        if (e.contains(x, y)) v += e.value;
      }
      img(r, c) = std::max(v, 0.0) * mu_water;
    }
  }
  return img;
}

Image shepp_logan(int rows, int cols, double mu_water) {
  if (rows < 16 || cols < 16) throw DimensionError("shepp_logan needs at least 16x16");
  return render_ellipses(shepp_logan_ellipses(), rows, cols, mu_water);
}

Image random_phantom(int rows, int cols, std::uint64_t seed, double mu_water) {
  if (rows < 16 || cols < 16) throw DimensionError("random_phantom needs at least 16x16");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto es = shepp_logan_ellipses();

  const double sx = 1.0 + 0.08 * u(rng), sy = 1.0 + 0.08 * u(rng);
  const double rot = 10.0 * kDeg * u(rng);
  const double cr = std::cos(rot), sr = std::sin(rot);
  for (std::size_t i = 0; i < es.size(); ++i) {
    auto& e = es[i];
    if (i >= 2) {
      e.x0 += 0.04 * u(rng);
      e.y0 += 0.04 * u(rng);
      e.a *= 1.0 + 0.25 * u(rng);
      e.b *= 1.0 + 0.25 * u(rng);
      e.value *= 1.0 + 0.5 * u(rng);
    }
    const double x = e.x0 * sx, y = e.y0 * sy;
    e.x0 = cr * x - sr * y;
    e.y0 = sr * x + cr * y;
    e.a *= sx;
    e.b *= sy;
    e.phi += rot;
  }
  // Extra lesions inside the brain region.
  const int extra = 2 + static_cast<int>(rng() % 3);
  for (int k = 0; k < extra; ++k) {
    const double rad = 0.45 * (0.5 + 0.5 * u(rng));
    const double ang = std::numbers::pi * u(rng);
    const double ax = 0.02 + 0.05 * (0.5 + 0.5 * u(rng));
    const double bx = 0.02 + 0.05 * (0.5 + 0.5 * u(rng));
    const double val = 0.03 * u(rng);
    es.push_back({rad * std::cos(ang) * sx, rad * std::sin(ang) * sy, ax, bx, std::numbers::pi * u(rng), val});
  }
  return render_ellipses(es, rows, cols, mu_water);
}

Image disk_phantom(int rows, int cols, double pixel_size, double radius, double value, double mu_water) {
  Image img(rows, cols, mu_water);
  for (int r = 0; r < rows; ++r) {
    const double y = (0.5 * (rows - 1) - r) * pixel_size;
    for (int c = 0; c < cols; ++c) {
      const double x = (c - 0.5 * (cols - 1)) * pixel_size;
      if (x * x + y * y <= radius * radius) img(r, c) = value;
    }
  }
  return img;
}

}  // namespace superct
