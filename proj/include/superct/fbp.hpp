#pragma once

#include <string>

#include "superct/geometry.hpp"
#include "superct/image.hpp"

namespace superct {

enum class FbpWindow { ram_lak, hann };

FbpWindow fbp_window_from_string(const std::string& s);

struct FbpResult {
  Image image;
  bool few_views = false;  // fewer than 8 views: quality not guaranteed
};

/// Parallel: ramp filter + backprojection over [0, pi).
/// Fan arc: cosine pre-weighting, fan-corrected ramp, 1/L^2 weighted
/// backprojection over [0, 2 pi).
FbpResult fbp_reconstruct(const Sinogram& sino, const Geometry& geom, FbpWindow window = FbpWindow::ram_lak);

}  // namespace superct
