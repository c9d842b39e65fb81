#pragma once

#include <cstdint>
#include <vector>

#include "superct/image.hpp"

namespace superct {

/// Ellipse in normalized coordinates: the image spans [-1, 1] in both axes.
struct Ellipse {
  double x0, y0;  // centre
  double a, b;    // semi-axes
  double phi;     // rotation, radians, counter-clockwise
  double value;   // additive intensity
  bool contains(double x, double y) const;
};

/// The ten-ellipse table, intensity 1 == water.
std::vector<Ellipse> shepp_logan_ellipses();

/// Point-sampled sum of ellipses at pixel centres, scaled by mu_water.
Image render_ellipses(const std::vector<Ellipse>& ellipses, int rows, int cols, double mu_water);

Image shepp_logan(int rows, int cols, double mu_water = kDefaultMuWater);

/// A seeded random variant: jittered head outline and inserts plus a few
/// extra small lesions. Used to build training sets.
Image random_phantom(int rows, int cols, std::uint64_t seed, double mu_water = kDefaultMuWater);

/// Disk of the given radius (mm) and value centred at the isocentre.
Image disk_phantom(int rows, int cols, double pixel_size, double radius, double value,
                   double mu_water = kDefaultMuWater);

}  // namespace superct
