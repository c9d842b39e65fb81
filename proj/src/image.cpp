#include "superct/image.hpp"

#include <cmath>
#include <string>

#include "superct/error.hpp"

namespace superct {

double to_hu(double mu, double mu_water) { return 1000.0 * (mu - mu_water) / mu_water; }
double from_hu(double hu, double mu_water) { return mu_water * (1.0 + hu / 1000.0); }
double to_display(double mu, double mu_water) { return 1000.0 * mu / mu_water; }
double from_display(double value, double mu_water) { return value * mu_water / 1000.0; }

Image::Image(int rows_, int cols_, double mu_water_, double fill)
    : rows(rows_), cols(cols_), mu_water(mu_water_) {
  if (rows_ < 0 || cols_ < 0) throw DimensionError("negative image dimensions");
  values.assign(static_cast<std::size_t>(rows_) * cols_, fill);
}

Image::Image(int rows_, int cols_, std::vector<double> values_, double mu_water_)
    : rows(rows_), cols(cols_), values(std::move(values_)), mu_water(mu_water_) {
  if (values.size() != static_cast<std::size_t>(rows) * cols) {
    throw DimensionError("image value count does not match " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
}

bool Image::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Image image_from_vector(int rows, int cols, const Eigen::VectorXd& v, double mu_water) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols) throw DimensionError("vector/image size mismatch");
  return Image(rows, cols, std::vector<double>(v.data(), v.data() + v.size()), mu_water);
}

const char* to_string(SinogramKind kind) {
  switch (kind) {
    case SinogramKind::line_integral: return "line-integral";
    case SinogramKind::counts: return "counts";
    case SinogramKind::weights: return "weights";
  }
  return "unknown";
}

SinogramKind sinogram_kind_from_string(const std::string& s) {
  if (s == "line-integral") return SinogramKind::line_integral;
  if (s == "counts") return SinogramKind::counts;
  if (s == "weights") return SinogramKind::weights;
  throw ConfigError("unknown sinogram kind '" + s + "'");
}

Sinogram::Sinogram(int n_views_, int n_bins_, SinogramKind kind_, double fill)
    : kind(kind_), n_views(n_views_), n_bins(n_bins_) {
  if (n_views_ < 0 || n_bins_ < 0) throw DimensionError("negative sinogram dimensions");
  values.assign(static_cast<std::size_t>(n_views_) * n_bins_, fill);
}

}  // namespace superct
