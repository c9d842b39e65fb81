#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace superct {

enum class GeometryKind { parallel, fan_arc };

const char* to_string(GeometryKind kind);
GeometryKind geometry_kind_from_string(const std::string& s);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// A line through the image plane: a point on it and a unit direction (mm).
/// Parallel rays use the point closest to the isocentre, fan rays the source.
struct Ray {
  Point2 origin;
  Point2 direction;
};

/// 2D scanner geometry.
///
/// Parallel beam: view angle theta, detector coordinate u; the ray for (theta, u)
/// is the line { p : p . (cos theta, sin theta) = u } travelled along
/// (-sin theta, cos theta). Bin spacing is in mm.
///
/// Fan beam on an arc detector centred at the source: the source sits at
/// source_to_iso * (sin theta, -cos theta); a bin at fan angle g sends its ray
/// along (-sin(theta - g), cos(theta - g)), i.e. the parallel ray with angle
/// theta - g and offset source_to_iso * sin g. Bin spacing is in radians.
struct Geometry {
  GeometryKind kind = GeometryKind::parallel;
  int n_views = 0;
  int n_bins = 0;
  int image_rows = 0;
  int image_cols = 0;
  double pixel_size = 1.0;          // mm
  double source_to_iso = 0.0;       // mm, fan only
  double source_to_detector = 0.0;  // mm, fan only
  double bin_spacing = 1.0;         // mm (parallel) or radians (fan arc)
  std::vector<double> view_angles;  // radians

  std::size_t n_rays() const { return static_cast<std::size_t>(n_views) * n_bins; }
  std::size_t n_pixels() const { return static_cast<std::size_t>(image_rows) * image_cols; }

  /// Throws ConfigError on any broken invariant.
  void validate() const;

  /// Offset of a bin from the detector centre, in bin_spacing units (mm or rad).
  double bin_offset(int bin) const { return (bin - 0.5 * (n_bins - 1)) * bin_spacing; }

  Ray ray(int view, int bin) const;

  /// Equally spaced views over [0, pi), detector spacing defaults to the pixel size.
  static Geometry parallel(int rows, int cols, double pixel_size, int n_views, int n_bins,
                           double bin_spacing = 0.0);

  /// Equally spaced views over [0, 2 pi). A non-positive bin spacing selects the
  /// spacing whose fan just covers the circle circumscribing the image (+2%).
  static Geometry fan_arc(int rows, int cols, double pixel_size, int n_views, int n_bins,
                          double source_to_iso, double source_to_detector,
                          double bin_spacing = 0.0);

  /// 128x128 at 4 x 0.9766 mm, 246 views x 128 bins on a 541/949 mm fan arc.
  static Geometry desk_default();
};

}  // namespace superct
