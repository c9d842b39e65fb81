#pragma once

#include <vector>

#include <Eigen/Core>

#include "superct/image.hpp"

namespace superct {

/// Square patches fully inside the image, top-left corners on a stride grid.
struct PatchConfig {
  int side = 8;
  int stride = 1;

  void validate(int rows, int cols) const;
  int per_col(int rows) const { return (rows - side) / stride + 1; }
  int per_row(int cols) const { return (cols - side) / stride + 1; }
  int count(int rows, int cols) const { return per_col(rows) * per_row(cols); }
  int dim() const { return side * side; }
};

/// One column per patch in raster order of top-left corners; each column is
/// the row-major vectorization of its patch.
Eigen::MatrixXd extract_patches(const Image& image, const PatchConfig& cfg);

/// sum_j tau_j P_j^T v_j. An empty tau means tau == 1.
Image assemble_weighted(const Eigen::MatrixXd& patches, const PatchConfig& cfg, int rows, int cols,
                        const std::vector<double>& tau = {}, double mu_water = kDefaultMuWater);

/// Diagonal of sum_j tau_j P_j^T P_j.
Eigen::VectorXd patch_coverage(const PatchConfig& cfg, int rows, int cols, const std::vector<double>& tau = {});

/// Keeps entries with |v_i| >= gamma.
Eigen::VectorXd hard_threshold(const Eigen::VectorXd& v, double gamma);

}  // namespace superct
