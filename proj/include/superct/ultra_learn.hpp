#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "superct/image.hpp"
#include "superct/patches.hpp"
#include "superct/transform_union.hpp"

namespace superct {

struct LearnConfig {
  int K = 5;
  double eta = 0.0;  // <= 0 selects (0.1 * patch dynamic range)^2
  double lambda0 = 31.0;
  int n_iters = 50;
  std::uint64_t seed = 0;
  PatchConfig patch;
};

struct LearnResult {
  TransformUnion transforms;
  std::vector<int> labels;
  Eigen::MatrixXd codes;
  std::vector<double> objective;  // after initialization, then after every iteration
  double eta = 0.0;
};

/// ||Omega||_F^2 - log|det Omega|, +inf when singular.
double q_penalty(const Eigen::MatrixXd& omega);

/// argmin_Omega ||Omega X - Z||_F^2 + lambda Q(Omega), closed form.
Eigen::MatrixXd transform_update(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z, double lambda);

/// sum_i ||Omega_{k_i} X_i - Z_i||^2 + eta ||Z||_0 + sum_k lambda0 (sum_{i in C_k} ||X_i||^2) Q(Omega_k).
double learning_objective(const Eigen::MatrixXd& X, const TransformUnion& un, const std::vector<int>& labels,
                          const Eigen::MatrixXd& Z, double eta, double lambda0);

/// Default eta for a patch set.
double default_eta(const Eigen::MatrixXd& X);

LearnResult learn_union(const Eigen::MatrixXd& X, const LearnConfig& cfg);

/// Patches from several images, concatenated in order.
Eigen::MatrixXd training_patches(const std::vector<Image>& images, const PatchConfig& cfg);

}  // namespace superct
