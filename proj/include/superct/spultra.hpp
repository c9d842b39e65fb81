#pragma once

#include <Eigen/Core>

#include "superct/pwls.hpp"

namespace superct {

struct LikelihoodTerms {
  double h = 0.0;
  double dh = 0.0;
  double ddh = 0.0;
};

/// Shifted count [y + s2]_+ of a raw measurement y.
double shifted_count(double y, double sigma2);

/// h(l) = (I0 e^-l + s2) - Y ln(I0 e^-l + s2) and its first two derivatives,
/// Y being a shifted count.
LikelihoodTerms h_derivatives(double l, double Y, double I0, double sigma2);

/// Smallest curvature whose parabola at l majorizes h on [0, inf), capped at
/// [h''(0)]_+ and floored at a tiny positive value.
double optimum_curvature(double l, double Y, double I0, double sigma2);

/// Quadratic surrogate of sum_i h_i([Ax]_i) at x^n:
/// 1/2 ||ytilde - Ax||_W^2 + constant.
struct SurrogateState {
  Eigen::VectorXd l;
  Eigen::VectorXd dh;
  Eigen::VectorXd w;
  Eigen::VectorXd ytilde;
  double constant = 0.0;
};

SurrogateState build_surrogate(const SystemMatrix& A, const Eigen::VectorXd& x, const MeasurementSet& meas);

/// sum_i h_i([Ax]_i) with Y_i the shifted measured counts.
double neg_log_likelihood(const SystemMatrix& A, const Eigen::VectorXd& x, const MeasurementSet& meas);

/// Penalized likelihood with fixed codes: L(x) + ULTRA penalty incl. the l0 term.
double spultra_objective(const SystemMatrix& A, const MeasurementSet& meas, const UltraParams& params,
                         const Image& x, const CodeAssignment& codes);

/// params.outer_iters surrogate rounds, each one OS-LALM image update then one
/// coding/clustering step.
UltraResult spultra_reconstruct(const SystemMatrix& A, const MeasurementSet& meas, const UltraParams& params,
                                const Image& init, const Image* reference = nullptr, SolveLog* log = nullptr);

}  // namespace superct
