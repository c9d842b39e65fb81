#include "superct/oslalm.hpp"

#include <cmath>
#include <numbers>

#include "superct/error.hpp"

namespace superct {

void OsLalmConfig::validate(int n_views) const {
  if (!(alpha >= 1.0 && alpha < 2.0)) throw ConfigError("os-lalm: alpha must lie in [1, 2)");
  if (M < 1) throw ConfigError("os-lalm: M must be >= 1");
  if (M > n_views) throw ConfigError("os-lalm: more subsets than views");
  if (P < 0) throw ConfigError("os-lalm: P must be >= 0");
  if (!(x_max > 0.0)) throw ConfigError("os-lalm: x_max must be > 0");
}

Eigen::VectorXd compute_DA(const SystemMatrix& A, const Eigen::VectorXd& w) {
  if (w.size() != A.rows()) throw DimensionError("compute_DA: weight length mismatch");
  if ((w.array() < 0.0).any()) throw ConfigError("compute_DA: negative weights");
  const Eigen::VectorXd a1 = A.forward(Eigen::VectorXd::Ones(A.cols()));
  Eigen::VectorXd d = A.back(w.cwiseProduct(a1));
  const double mx = d.size() ? d.maxCoeff() : 0.0;
  double floor = 1e-12 * mx;
  if (!(floor > 0.0)) floor = std::numeric_limits<double>::min();
  return d.cwiseMax(floor);
}

QuadraticProblem make_problem(const SystemMatrix& A, Eigen::VectorXd w, Eigen::VectorXd y) {
  if (y.size() != A.rows()) throw DimensionError("make_problem: target length mismatch");
  QuadraticProblem p;
  p.A = &A;
  p.DA = compute_DA(A, w);
  p.w = std::move(w);
  p.y = std::move(y);
  return p;
}

double rho_schedule(int t, double alpha) {
  if (t <= 0) return 1.0;
  const double a = std::numbers::pi / (alpha * (t + 1));
  return a * std::sqrt(1.0 - 0.25 * a * a);
}

double data_term(const QuadraticProblem& prob, const Eigen::VectorXd& x) {
  const Eigen::VectorXd r = prob.A->forward(x) - prob.y;
  return 0.5 * r.cwiseProduct(r).dot(prob.w);
}

Eigen::VectorXd os_lalm_update(const Eigen::VectorXd& x0, const QuadraticProblem& prob, const RegGradient& reg_grad,
                               const Eigen::VectorXd& DR, const OsLalmConfig& cfg, const PassCallback& on_pass) {
  const SystemMatrix& A = *prob.A;
  cfg.validate(A.n_views());
  if (x0.size() != A.cols() || DR.size() != A.cols() || prob.DA.size() != A.cols()) {
    throw DimensionError("os_lalm_update: image-domain length mismatch");
  }
  if (prob.w.size() != A.rows() || prob.y.size() != A.rows()) throw DimensionError("os_lalm_update: ray-domain length mismatch");
  const int M = cfg.M;
  const double alpha = cfg.alpha;
  const Eigen::VectorXd& DA = prob.DA;

  auto subset_grad = [&](const Eigen::VectorXd& x, int m) {
    Eigen::VectorXd r = A.forward_subset(x, m, M) - prob.y;
    r = r.cwiseProduct(prob.w);
    return Eigen::VectorXd(static_cast<double>(M) * A.back_subset(r, m, M));
  };

  Eigen::VectorXd x = x0;
  Eigen::VectorXd zeta = subset_grad(x, M - 1);
  Eigen::VectorXd g = zeta;
  Eigen::VectorXd eta = DA.cwiseProduct(x) - zeta;

  for (int p = 0; p < cfg.P; ++p) {
    for (int m = 0; m < M; ++m) {
      const double rho = rho_schedule(p * M + m, alpha);
      const Eigen::VectorXd s = rho * (DA.cwiseProduct(x) - eta) + (1.0 - rho) * g;
      Eigen::VectorXd step = s;
      if (reg_grad) step += reg_grad(x);
      x = (x.array() - step.array() / (rho * DA + DR).array()).cwiseMax(0.0).cwiseMin(cfg.x_max).matrix();
      if (!x.allFinite()) throw NumericalError("os-lalm diverged: non-finite iterate at pass " + std::to_string(p) + ", subset " + std::to_string(m));
      zeta = subset_grad(x, m);
      g = (rho * (alpha * zeta + (1.0 - alpha) * g) + g) / (rho + 1.0);
      eta = alpha * (DA.cwiseProduct(x) - zeta) + (1.0 - alpha) * eta;
    }
    if (on_pass) on_pass(p, x);
  }
  return x;
}

}  // namespace superct
