#include "superct/geometry.hpp"

#include <cmath>
#include <numbers>

#include "superct/error.hpp"

namespace superct {

namespace {

std::vector<double> uniform_angles(int n, double span) {
  std::vector<double> angles(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) angles[static_cast<std::size_t>(i)] = span * i / n;
  return angles;
}

}  // namespace

const char* to_string(GeometryKind kind) {
  return kind == GeometryKind::parallel ? "parallel" : "fan-arc";
}

GeometryKind geometry_kind_from_string(const std::string& s) {
  if (s == "parallel") return GeometryKind::parallel;
  if (s == "fan-arc") return GeometryKind::fan_arc;
  throw ConfigError("unknown geometry kind '" + s + "' (expected parallel or fan-arc)");
}

void Geometry::validate() const {
  if (n_views < 1) throw ConfigError("geometry: n_views must be >= 1");
  if (n_bins < 1) throw ConfigError("geometry: n_bins must be >= 1");
  if (image_rows < 1 || image_cols < 1) throw ConfigError("geometry: image dimensions must be >= 1");
  if (!(pixel_size > 0.0)) throw ConfigError("geometry: pixel_size must be > 0");
  if (!(bin_spacing > 0.0)) throw ConfigError("geometry: bin_spacing must be > 0");
  if (view_angles.size() != static_cast<std::size_t>(n_views)) {
    throw ConfigError("geometry: view_angles length differs from n_views");
  }
  for (std::size_t i = 0; i < view_angles.size(); ++i) {
    const double a = view_angles[i];
    if (!(a >= 0.0 && a < 2.0 * std::numbers::pi)) throw ConfigError("geometry: view angle outside [0, 2pi)");
    if (i > 0 && !(a > view_angles[i - 1])) throw ConfigError("geometry: view angles must be strictly increasing");
  }
  if (kind == GeometryKind::fan_arc) {
    const double half_diag = 0.5 * pixel_size * std::hypot(image_rows, image_cols);
    if (!(source_to_iso > half_diag)) {
      throw ConfigError("geometry: source_to_iso must exceed half the image diagonal");
    }
    if (!(source_to_detector > source_to_iso)) {
      throw ConfigError("geometry: source_to_detector must exceed source_to_iso");
    }
    if (!(0.5 * n_bins * bin_spacing < 0.5 * std::numbers::pi)) {
      throw ConfigError("geometry: fan angle must stay below pi");
    }
  }
}

Ray Geometry::ray(int view, int bin) const {
  const double theta = view_angles[static_cast<std::size_t>(view)];
  const double offset = bin_offset(bin);
  Ray r;
  if (kind == GeometryKind::parallel) {
    const double c = std::cos(theta), s = std::sin(theta);
    r.direction = {-s, c};
    r.origin = {offset * c, offset * s};
  } else {
    const double ang = theta - offset;
    r.direction = {-std::sin(ang), std::cos(ang)};
    r.origin = {source_to_iso * std::sin(theta), -source_to_iso * std::cos(theta)};
  }
  return r;
}

Geometry Geometry::parallel(int rows, int cols, double pixel_size, int n_views, int n_bins,
                            double bin_spacing) {
  Geometry g;
  g.kind = GeometryKind::parallel;
  g.image_rows = rows;
  g.image_cols = cols;
  g.pixel_size = pixel_size;
  g.n_views = n_views;
  g.n_bins = n_bins;
  g.bin_spacing = bin_spacing > 0.0 ? bin_spacing : pixel_size;
  g.view_angles = uniform_angles(n_views, std::numbers::pi);
  g.validate();
  return g;
}

Geometry Geometry::fan_arc(int rows, int cols, double pixel_size, int n_views, int n_bins,
                           double source_to_iso, double source_to_detector, double bin_spacing) {
  Geometry g;
  g.kind = GeometryKind::fan_arc;
  g.image_rows = rows;
  g.image_cols = cols;
  g.pixel_size = pixel_size;
  g.n_views = n_views;
  g.n_bins = n_bins;
  g.source_to_iso = source_to_iso;
  g.source_to_detector = source_to_detector;
  if (bin_spacing > 0.0) {
    g.bin_spacing = bin_spacing;
  } else {
    const double radius = 1.02 * 0.5 * pixel_size * std::hypot(rows, cols);
    if (!(radius < source_to_iso)) throw ConfigError("geometry: source inside the object support");
    g.bin_spacing = 2.0 * std::asin(radius / source_to_iso) / n_bins;
  }
  g.view_angles = uniform_angles(n_views, 2.0 * std::numbers::pi);
  g.validate();
  return g;
}

Geometry Geometry::desk_default() {
  return fan_arc(128, 128, 4.0 * 0.9766, 246, 128, 541.0, 949.0);
}

}  // namespace superct
