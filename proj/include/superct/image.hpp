#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace superct {

inline constexpr double kDefaultMuWater = 0.0192;  // mm^-1

double to_hu(double mu, double mu_water);
double from_hu(double hu, double mu_water);

// Shifted Hounsfield scale with water at 1000, used for display windows,
// PSNR peaks and SSIM.
double to_display(double mu, double mu_water);
double from_display(double value, double mu_water);

/// Row-major grid of linear attenuation coefficients (mm^-1).
/// Row 0 is the top of the image (largest y), column 0 the left edge.
struct Image {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;
  double mu_water = kDefaultMuWater;

  Image() = default;
  Image(int rows, int cols, double mu_water = kDefaultMuWater, double fill = 0.0);
  Image(int rows, int cols, std::vector<double> values, double mu_water = kDefaultMuWater);

  std::size_t size() const { return values.size(); }
  double& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }

  Eigen::Map<Eigen::VectorXd> vec() { return {values.data(), static_cast<Eigen::Index>(values.size())}; }
  Eigen::Map<const Eigen::VectorXd> vec() const {
    return {values.data(), static_cast<Eigen::Index>(values.size())};
  }

  bool all_finite() const;
  bool same_shape(const Image& other) const { return rows == other.rows && cols == other.cols; }
};

Image image_from_vector(int rows, int cols, const Eigen::VectorXd& v, double mu_water = kDefaultMuWater);

enum class SinogramKind { line_integral, counts, weights };

const char* to_string(SinogramKind kind);
SinogramKind sinogram_kind_from_string(const std::string& s);

/// Per-ray data laid out view-major: index = view * n_bins + bin.
struct Sinogram {
  SinogramKind kind = SinogramKind::line_integral;
  int n_views = 0;
  int n_bins = 0;
  std::vector<double> values;

  Sinogram() = default;
  Sinogram(int n_views, int n_bins, SinogramKind kind = SinogramKind::line_integral, double fill = 0.0);

  std::size_t size() const { return values.size(); }
  double& at(int view, int bin) { return values[static_cast<std::size_t>(view) * n_bins + bin]; }
  double at(int view, int bin) const { return values[static_cast<std::size_t>(view) * n_bins + bin]; }

  Eigen::Map<Eigen::VectorXd> vec() { return {values.data(), static_cast<Eigen::Index>(values.size())}; }
  Eigen::Map<const Eigen::VectorXd> vec() const {
    return {values.data(), static_cast<Eigen::Index>(values.size())};
  }
};

}  // namespace superct
