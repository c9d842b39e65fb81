#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "superct/patches.hpp"

namespace superct {

/// K square transforms acting on vectorized side x side patches.
struct TransformUnion {
  int patch_side = 8;
  std::vector<Eigen::MatrixXd> transforms;

  int K() const { return static_cast<int>(transforms.size()); }
  int dim() const { return patch_side * patch_side; }
  /// Throws ConfigError for wrong shapes, non-finite entries or singular members.
  void validate() const;

  /// K copies of the orthonormal 2D DCT.
  static TransformUnion dct(int K, int patch_side);
};

/// Separable orthonormal DCT-II matrix acting on row-major patches.
Eigen::MatrixXd dct2_matrix(int side);

/// sum_i (|v_i| >= gamma ? gamma^2 : v_i^2), accumulated in index order.
double sparse_coding_cost(const Eigen::VectorXd& v, double gamma);

struct CodeResult {
  int label = 0;  // 0-based class index
  Eigen::VectorXd code;
  double cost = 0.0;
};

/// Best class for one patch. `extra`, when given, adds extra[k] to class k's cost.
CodeResult code_and_cluster(const Eigen::VectorXd& u, const TransformUnion& un, double gamma,
                            const double* extra = nullptr);

struct CodeAssignment {
  int K = 0;
  std::vector<int> labels;  // 0-based
  Eigen::MatrixXd codes;    // dim x n_patches
  std::vector<double> costs;

  std::size_t size() const { return labels.size(); }
};

/// Codes every column of `patches` independently.
CodeAssignment code_and_cluster_all(const Eigen::MatrixXd& patches, const TransformUnion& un, double gamma);

/// Per-pixel majority vote among overlapping patches; ties go to the lower
/// class, uncovered pixels get -1.
std::vector<int> cluster_map(const CodeAssignment& a, const PatchConfig& cfg, int rows, int cols);

void write_union(const std::filesystem::path& path, const TransformUnion& un);
TransformUnion read_union(const std::filesystem::path& path);

void write_assignment(const std::filesystem::path& path, const CodeAssignment& a);
CodeAssignment read_assignment(const std::filesystem::path& path);

}  // namespace superct
