#pragma once

#include <functional>

#include <Eigen/Core>

#include "superct/image.hpp"
#include "superct/projector.hpp"

namespace superct {

struct OsLalmConfig {
  double alpha = 1.999;
  int M = 1;  // ordered subsets
  int P = 1;  // passes over all subsets
  double x_max = 4.0 * kDefaultMuWater;  // 3000 HU
  void validate(int n_views) const;
};

/// 1/2 ||y - A x||_W^2 with its diagonal majorizer.
struct QuadraticProblem {
  const SystemMatrix* A = nullptr;
  Eigen::VectorXd w;
  Eigen::VectorXd y;
  Eigen::VectorXd DA;
};

/// diag{A^T W A 1}, floored at 1e-12 * max.
Eigen::VectorXd compute_DA(const SystemMatrix& A, const Eigen::VectorXd& w);

QuadraticProblem make_problem(const SystemMatrix& A, Eigen::VectorXd w, Eigen::VectorXd y);

double rho_schedule(int t, double alpha);

/// Gradient of the smooth regularizer part; an empty function means zero.
using RegGradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Called after every full pass over the subsets.
using PassCallback = std::function<void(int pass, const Eigen::VectorXd& x)>;

/// Relaxed OS-LALM on 1/2||y - Ax||_W^2 + R2(x) over the box [0, x_max].
/// Dual variables are initialized from x0 on every call.
Eigen::VectorXd os_lalm_update(const Eigen::VectorXd& x0, const QuadraticProblem& prob, const RegGradient& reg_grad,
                               const Eigen::VectorXd& DR, const OsLalmConfig& cfg, const PassCallback& on_pass = {});

/// 1/2 ||y - Ax||_W^2.
double data_term(const QuadraticProblem& prob, const Eigen::VectorXd& x);

}  // namespace superct
