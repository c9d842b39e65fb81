#include "superct/pwls.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>

#include "superct/error.hpp"
#include "superct/metrics.hpp"
#include "superct/regularizers.hpp"

namespace superct {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void check_meas(const SystemMatrix& A, const MeasurementSet& meas, const Image& init) {
  if (meas.post_log.size() != static_cast<std::size_t>(A.rows()) || meas.weights.size() != static_cast<std::size_t>(A.rows())) {
    throw DimensionError("measurements do not match the system matrix");
  }
  if (init.size() != static_cast<std::size_t>(A.cols())) throw DimensionError("initial image does not match the system matrix");
}

Eigen::VectorXd sino_vec(const Sinogram& s) { return Eigen::Map<const Eigen::VectorXd>(s.values.data(), static_cast<Eigen::Index>(s.size())); }

}  // namespace

void SolveLog::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open '" + path.string() + "' for writing");
  os << std::setprecision(17) << "iter,objective,rmse_hu,seconds\n";
  for (const auto& r : records) os << r.iter << ',' << r.objective << ',' << r.rmse_hu << ',' << r.seconds << '\n';
  os << "# init_seconds," << init_seconds << "\n# total_seconds," << total_seconds << '\n';
}

Image pwls_ep_reconstruct(const SystemMatrix& A, const MeasurementSet& meas, const EpParams& ep,
                          const OsLalmConfig& cfg, const Image& init, const Image* reference, SolveLog* log) {
  check_meas(A, meas, init);
  const auto t0 = Clock::now();
  const int rows = init.rows, cols = init.cols;
  QuadraticProblem prob = make_problem(A, sino_vec(meas.weights), sino_vec(meas.post_log));
  Eigen::VectorXd kappa = ep.uniform_kappa ? Eigen::VectorXd::Ones(A.cols()) : kappa_weights(A, prob.w);
  const EpRegularizer reg(rows, cols, ep.beta, ep.delta_hu * init.mu_water / 1000.0, std::move(kappa));
  const Eigen::VectorXd DR = reg.majorizer();
  if (log) log->init_seconds += since(t0);

  PassCallback cb;
  if (log) {
    cb = [&](int pass, const Eigen::VectorXd& x) {
      SolveRecord r;
      r.iter = pass + 1;
      r.objective = data_term(prob, x) + reg.value(x);
      if (reference) r.rmse_hu = rmse(image_from_vector(rows, cols, x, init.mu_water), *reference);
      r.seconds = since(t0);
      log->records.push_back(r);
    };
  }
  const Eigen::VectorXd x = os_lalm_update(init.vec(), prob, [&](const Eigen::VectorXd& v) { return reg.gradient(v); }, DR, cfg, cb);
  if (log) log->total_seconds += since(t0);
  return image_from_vector(rows, cols, x, init.mu_water);
}

CodeAssignment code_image(const Image& image, const UltraParams& params) {
  return code_and_cluster_all(extract_patches(image, params.patch), params.transforms, params.gamma);
}

double pwls_ultra_objective(const SystemMatrix& A, const MeasurementSet& meas, const UltraParams& params,
                            const Image& x, const CodeAssignment& codes) {
  QuadraticProblem prob;
  prob.A = &A;
  prob.w = sino_vec(meas.weights);
  prob.y = sino_vec(meas.post_log);
  UltraRegularizer reg(params.transforms, params.patch, x.rows, x.cols, params.beta, params.tau);
  reg.set_codes(codes);
  return data_term(prob, x.vec()) + reg.value(x.vec()) + reg.sparsity_term(params.gamma);
}

UltraResult pwls_ultra_reconstruct(const SystemMatrix& A, const MeasurementSet& meas, const UltraParams& params,
                                   const Image& init, const Image* reference, SolveLog* log) {
  check_meas(A, meas, init);
  params.transforms.validate();
  if (params.outer_iters < 0) throw ConfigError("pwls-ultra: outer_iters must be >= 0");
  if (!(params.gamma > 0.0)) throw ConfigError("pwls-ultra: gamma must be > 0");
  const auto t0 = Clock::now();
  const int rows = init.rows, cols = init.cols;
  QuadraticProblem prob = make_problem(A, sino_vec(meas.weights), sino_vec(meas.post_log));
  UltraRegularizer reg(params.transforms, params.patch, rows, cols, params.beta, params.tau);
  const Eigen::VectorXd DR = reg.majorizer();
  if (log) log->init_seconds += since(t0);

  Image x = init;
  CodeAssignment codes = code_image(x, params);
  for (int n = 0; n < params.outer_iters; ++n) {
    reg.set_codes(codes);
    Eigen::VectorXd xn;
    try {
      xn = os_lalm_update(x.vec(), prob, [&](const Eigen::VectorXd& v) { return reg.gradient(v); }, DR, params.inner);
    } catch (const NumericalError& e) {
      if (log) log->total_seconds += since(t0);
      return {std::move(x), std::move(codes), true, std::string("pwls-ultra outer iteration ") + std::to_string(n) + ": " + e.what()};
    }
    x = image_from_vector(rows, cols, xn, init.mu_water);
    codes = code_image(x, params);
    if (log) {
      reg.set_codes(codes);
      SolveRecord r;
      r.iter = n + 1;
      r.objective = data_term(prob, x.vec()) + reg.value(x.vec()) + reg.sparsity_term(params.gamma);
      if (reference) r.rmse_hu = rmse(x, *reference);
      r.seconds = since(t0);
      log->records.push_back(r);
    }
  }
  if (log) log->total_seconds += since(t0);
  return {std::move(x), std::move(codes), false, {}};
}

}  // namespace superct
