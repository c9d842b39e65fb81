#pragma once

#include <vector>

#include <Eigen/Core>

#include "superct/patches.hpp"
#include "superct/projector.hpp"
#include "superct/transform_union.hpp"

namespace superct {

/// Hyperbola-like edge-preserving potential and its derivative.
double ep_potential(double t, double delta);
double ep_derivative(double t, double delta);

/// kappa_j = sqrt([A^T W 1]_j / [A^T 1]_j), zero where A^T 1 vanishes.
Eigen::VectorXd kappa_weights(const SystemMatrix& A, const Eigen::VectorXd& w);

/// beta sum_j sum_{k in N8(j)} kappa_j kappa_k phi(x_j - x_k).
class EpRegularizer {
public:
  EpRegularizer(int rows, int cols, double beta, double delta, Eigen::VectorXd kappa);

  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  /// 4 beta sum_k kappa_j kappa_k.
  Eigen::VectorXd majorizer() const;

private:
  int rows_, cols_;
  double beta_, delta_;
  Eigen::VectorXd kappa_;
};

/// D_R = 2 beta max_k ||Omega_k^T Omega_k||_2 sum_j tau_j P_j^T P_j.
Eigen::VectorXd compute_DR(double beta, const TransformUnion& un, const std::vector<double>& tau,
                           const PatchConfig& cfg, int rows, int cols);

/// Largest eigenvalue of Omega^T Omega over the union.
double max_spectral(const TransformUnion& un);

/// beta sum_j tau_j ||Omega_{k_j} P_j x - z_j||^2 for a fixed assignment.
class UltraRegularizer {
public:
  UltraRegularizer(const TransformUnion& un, const PatchConfig& cfg, int rows, int cols, double beta,
                   std::vector<double> tau = {});

  void set_codes(const CodeAssignment& a);
  const CodeAssignment& codes() const { return codes_; }

  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  Eigen::VectorXd majorizer() const;
  /// beta gamma^2 sum_j tau_j ||z_j||_0.
  double sparsity_term(double gamma) const;

  const std::vector<double>& tau() const { return tau_; }

private:
  double tau_at(std::size_t j) const { return tau_.empty() ? 1.0 : tau_[j]; }

  const TransformUnion* un_;
  PatchConfig cfg_;
  int rows_, cols_;
  double beta_;
  std::vector<double> tau_;
  std::vector<Eigen::MatrixXd> gram_;  // Omega_k^T Omega_k
  CodeAssignment codes_;
  std::vector<std::vector<int>> members_;
  std::vector<Eigen::MatrixXd> shift_;  // Omega_k^T z_j per member
};

}  // namespace superct
