#include "superct/spultra.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>

#include "superct/error.hpp"
#include "superct/metrics.hpp"
#include "superct/regularizers.hpp"

namespace superct {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double clamped_exp(double e) { return std::exp(std::clamp(e, -700.0, 700.0)); }

// Gauss-Legendre nodes/weights on [-1, 1], 8 points.
constexpr std::array<double, 4> kGlNode = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
constexpr std::array<double, 4> kGlWeight = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

}  // namespace

double shifted_count(double y, double sigma2) { return std::max(y + sigma2, 0.0); }

LikelihoodTerms h_derivatives(double l, double Y, double I0, double sigma2) {
  const double b = I0 * clamped_exp(-l);
  const double m = b + sigma2;
  LikelihoodTerms t;
  t.h = m - Y * std::log(m);
  t.dh = b * (Y / m - 1.0);
  t.ddh = b * (1.0 - Y * sigma2 / (m * m));
  return t;
}

double optimum_curvature(double l, double Y, double I0, double sigma2) {
  const double cap = std::max(h_derivatives(0.0, Y, I0, sigma2).ddh, 0.0);
  const double eps = 1e-12 * cap + 1e-30;
  double c;
  if (l <= 0.0) {
    c = cap;
  } else if (l < 0.5) {
    // 2/l^2 * int_0^l s h''(s) ds, exact up to quadrature error and free of
    // the cancellation in the closed form.
    double acc = 0.0;
    for (std::size_t i = 0; i < kGlNode.size(); ++i) {
      for (double sgn : {-1.0, 1.0}) {
        const double s = 0.5 * l * (1.0 + sgn * kGlNode[i]);
        acc += kGlWeight[i] * s * h_derivatives(s, Y, I0, sigma2).ddh;
      }
    }
    c = 2.0 / (l * l) * (0.5 * l * acc);
  } else {
    const auto h0 = h_derivatives(0.0, Y, I0, sigma2);
    const auto hl = h_derivatives(l, Y, I0, sigma2);
    c = 2.0 * (h0.h - hl.h + l * hl.dh) / (l * l);
  }
  c = std::min(std::max(c, 0.0), cap);
  return c > 0.0 ? c : eps;
}

SurrogateState build_surrogate(const SystemMatrix& A, const Eigen::VectorXd& x, const MeasurementSet& meas) {
  if (meas.counts.size() != static_cast<std::size_t>(A.rows())) throw DimensionError("build_surrogate: counts do not match the system");
  if ((x.array() < 0.0).any()) throw ConfigError("build_surrogate: x must be nonnegative");
  SurrogateState s;
  s.l = A.forward(x);
  const Eigen::Index n = s.l.size();
  s.dh.resize(n);
  s.w.resize(n);
  s.ytilde.resize(n);
  const double I0 = meas.protocol.I0, s2 = meas.protocol.sigma * meas.protocol.sigma;
  std::vector<double> hv(static_cast<std::size_t>(n)), corr(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const double li = std::max(s.l[i], 0.0);
    const double Y = shifted_count(meas.counts.values[static_cast<std::size_t>(i)], s2);
    const auto t = h_derivatives(li, Y, I0, s2);
    const double c = optimum_curvature(li, Y, I0, s2);
    s.dh[i] = t.dh;
    s.w[i] = c;
    s.ytilde[i] = s.l[i] - t.dh / c;
    hv[static_cast<std::size_t>(i)] = t.h;
    corr[static_cast<std::size_t>(i)] = 0.5 * t.dh * t.dh / c;
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) total += hv[static_cast<std::size_t>(i)] - corr[static_cast<std::size_t>(i)];
  s.constant = total;
  if (!s.ytilde.allFinite()) throw NumericalError("build_surrogate: non-finite surrogate target");
  return s;
}

double neg_log_likelihood(const SystemMatrix& A, const Eigen::VectorXd& x, const MeasurementSet& meas) {
  const Eigen::VectorXd l = A.forward(x);
  const double I0 = meas.protocol.I0, s2 = meas.protocol.sigma * meas.protocol.sigma;
  double total = 0.0;
  for (Eigen::Index i = 0; i < l.size(); ++i)
    total += h_derivatives(l[i], shifted_count(meas.counts.values[static_cast<std::size_t>(i)], s2), I0, s2).h;
  return total;
}

double spultra_objective(const SystemMatrix& A, const MeasurementSet& meas, const UltraParams& params,
                         const Image& x, const CodeAssignment& codes) {
  UltraRegularizer reg(params.transforms, params.patch, x.rows, x.cols, params.beta, params.tau);
  reg.set_codes(codes);
  return neg_log_likelihood(A, x.vec(), meas) + reg.value(x.vec()) + reg.sparsity_term(params.gamma);
}

UltraResult spultra_reconstruct(const SystemMatrix& A, const MeasurementSet& meas, const UltraParams& params,
                                const Image& init, const Image* reference, SolveLog* log) {
  if (init.size() != static_cast<std::size_t>(A.cols())) throw DimensionError("spultra: initial image does not match the system");
  if (meas.counts.size() != static_cast<std::size_t>(A.rows())) throw DimensionError("spultra: counts do not match the system");
  params.transforms.validate();
  if (params.outer_iters < 0) throw ConfigError("spultra: outer_iters must be >= 0");
  if (!(params.gamma > 0.0)) throw ConfigError("spultra: gamma must be > 0");
  const auto t0 = Clock::now();
  const int rows = init.rows, cols = init.cols;
  UltraRegularizer reg(params.transforms, params.patch, rows, cols, params.beta, params.tau);
  const Eigen::VectorXd DR = reg.majorizer();
  double init_time = since(t0);

  Image x = init;
  for (auto& v : x.values) v = std::clamp(v, 0.0, params.inner.x_max);
  if (params.outer_iters == 0) {
    if (log) log->init_seconds += init_time;
    return {init, code_image(init, params), false, {}};
  }
  CodeAssignment codes = code_image(x, params);
  for (int n = 0; n < params.outer_iters; ++n) {
    const auto ts = Clock::now();
    SurrogateState sur = build_surrogate(A, x.vec(), meas);
    QuadraticProblem prob = make_problem(A, std::move(sur.w), std::move(sur.ytilde));
    init_time += since(ts);

    reg.set_codes(codes);
    Eigen::VectorXd xn;
    try {
      xn = os_lalm_update(x.vec(), prob, [&](const Eigen::VectorXd& v) { return reg.gradient(v); }, DR, params.inner);
    } catch (const NumericalError& e) {
      if (log) log->total_seconds += since(t0);
      return {std::move(x), std::move(codes), true, std::string("spultra outer iteration ") + std::to_string(n) + ": " + e.what()};
    }
    x = image_from_vector(rows, cols, xn, init.mu_water);
    codes = code_image(x, params);
    if (log) {
      reg.set_codes(codes);
      SolveRecord r;
      r.iter = n + 1;
      r.objective = neg_log_likelihood(A, x.vec(), meas) + reg.value(x.vec()) + reg.sparsity_term(params.gamma);
      if (reference) r.rmse_hu = rmse(x, *reference);
      r.seconds = since(t0);
      log->records.push_back(r);
    }
  }
  if (log) {
    log->init_seconds += init_time;
    log->total_seconds += since(t0);
  }
  return {std::move(x), std::move(codes), false, {}};
}

}  // namespace superct
