#include "superct/regularizers.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "superct/error.hpp"

namespace superct {

namespace {

constexpr int kNeighbors[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}};

}  // namespace

double ep_potential(double t, double delta) {
  const double a = std::abs(t / delta);
  return delta * delta * (a - std::log1p(a));
}

double ep_derivative(double t, double delta) { return t / (1.0 + std::abs(t / delta)); }

Eigen::VectorXd kappa_weights(const SystemMatrix& A, const Eigen::VectorXd& w) {
  const Eigen::VectorXd num = A.back(w);
  const Eigen::VectorXd den = A.back(Eigen::VectorXd::Ones(A.rows()));
  Eigen::VectorXd k(num.size());
  for (Eigen::Index j = 0; j < k.size(); ++j) k[j] = den[j] > 0.0 ? std::sqrt(std::max(num[j], 0.0) / den[j]) : 0.0;
  return k;
}

EpRegularizer::EpRegularizer(int rows, int cols, double beta, double delta, Eigen::VectorXd kappa)
    : rows_(rows), cols_(cols), beta_(beta), delta_(delta), kappa_(std::move(kappa)) {
  if (!(beta >= 0.0)) throw ConfigError("ep: beta must be >= 0");
  if (!(delta > 0.0)) throw ConfigError("ep: delta must be > 0");
  if (kappa_.size() == 0) kappa_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(rows) * cols);
  if (kappa_.size() != static_cast<Eigen::Index>(rows) * cols) throw DimensionError("ep: kappa length mismatch");
}

double EpRegularizer::value(const Eigen::VectorXd& x) const {
  std::vector<double> rows(static_cast<std::size_t>(rows_));
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows_; ++r) {
    double row = 0.0;
    for (int c = 0; c < cols_; ++c) {
      const int j = r * cols_ + c;
      for (const auto& o : kNeighbors) {
        const int rr = r + o[0], cc = c + o[1];
        if (rr < 0 || rr >= rows_ || cc < 0 || cc >= cols_) continue;
        const int k = rr * cols_ + cc;
        row += kappa_[j] * kappa_[k] * ep_potential(x[j] - x[k], delta_);
      }
    }
    rows[static_cast<std::size_t>(r)] = row;
  }
  double total = 0.0;
  for (double v : rows) total += v;
  return beta_ * total;
}

Eigen::VectorXd EpRegularizer::gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g(x.size());
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      const int j = r * cols_ + c;
      double s = 0.0;
      for (const auto& o : kNeighbors) {
        const int rr = r + o[0], cc = c + o[1];
        if (rr < 0 || rr >= rows_ || cc < 0 || cc >= cols_) continue;
        const int k = rr * cols_ + cc;
        s += kappa_[k] * ep_derivative(x[j] - x[k], delta_);
      }
      g[j] = 2.0 * beta_ * kappa_[j] * s;
    }
  }
  return g;
}

Eigen::VectorXd EpRegularizer::majorizer() const {
  Eigen::VectorXd d(kappa_.size());
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      const int j = r * cols_ + c;
      double s = 0.0;
      for (const auto& o : kNeighbors) {
        const int rr = r + o[0], cc = c + o[1];
        if (rr < 0 || rr >= rows_ || cc < 0 || cc >= cols_) continue;
        s += kappa_[rr * cols_ + cc];
      }
      d[j] = 4.0 * beta_ * kappa_[j] * s;
    }
  }
  return d;
}

double max_spectral(const TransformUnion& un) {
  double best = 0.0;
  for (const auto& om : un.transforms) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(om.transpose() * om, Eigen::EigenvaluesOnly);
    best = std::max(best, es.eigenvalues().maxCoeff());
  }
  return best;
}

Eigen::VectorXd compute_DR(double beta, const TransformUnion& un, const std::vector<double>& tau,
                           const PatchConfig& cfg, int rows, int cols) {
  if (beta == 0.0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows) * cols);
  return 2.0 * beta * max_spectral(un) * patch_coverage(cfg, rows, cols, tau);
}

UltraRegularizer::UltraRegularizer(const TransformUnion& un, const PatchConfig& cfg, int rows, int cols, double beta,
                                   std::vector<double> tau)
    : un_(&un), cfg_(cfg), rows_(rows), cols_(cols), beta_(beta), tau_(std::move(tau)) {
  if (!(beta >= 0.0)) throw ConfigError("ultra: beta must be >= 0");
  if (un.patch_side != cfg.side) throw DimensionError("ultra: transform patch side differs from patch config");
  cfg.validate(rows, cols);
  if (!tau_.empty() && tau_.size() != static_cast<std::size_t>(cfg.count(rows, cols))) {
    throw DimensionError("ultra: tau length mismatch");
  }
  for (const auto& om : un.transforms) gram_.push_back(om.transpose() * om);
}

void UltraRegularizer::set_codes(const CodeAssignment& a) {
  if (a.size() != static_cast<std::size_t>(cfg_.count(rows_, cols_)) || a.codes.rows() != cfg_.dim()) {
    throw DimensionError("ultra: assignment does not match the patch grid");
  }
  codes_ = a;
  const int K = un_->K();
  members_.assign(static_cast<std::size_t>(K), {});
  for (std::size_t j = 0; j < a.size(); ++j) {
    const int k = a.labels[j];
    if (k < 0 || k >= K) throw DimensionError("ultra: label out of range");
    members_[static_cast<std::size_t>(k)].push_back(static_cast<int>(j));
  }
  shift_.assign(static_cast<std::size_t>(K), {});
  for (int k = 0; k < K; ++k) {
    const auto& idx = members_[static_cast<std::size_t>(k)];
    Eigen::MatrixXd z(cfg_.dim(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t t = 0; t < idx.size(); ++t) z.col(static_cast<Eigen::Index>(t)) = a.codes.col(idx[t]);
    shift_[static_cast<std::size_t>(k)] = un_->transforms[static_cast<std::size_t>(k)].transpose() * z;
  }
}

double UltraRegularizer::value(const Eigen::VectorXd& x) const {
  const Image img(rows_, cols_, std::vector<double>(x.data(), x.data() + x.size()));
  const Eigen::MatrixXd p = extract_patches(img, cfg_);
  double total = 0.0;
  for (int k = 0; k < un_->K(); ++k) {
    const auto& idx = members_[static_cast<std::size_t>(k)];
    const auto& om = un_->transforms[static_cast<std::size_t>(k)];
    for (int j : idx) {
      total += tau_at(static_cast<std::size_t>(j)) * (om * p.col(j) - codes_.codes.col(j)).squaredNorm();
    }
  }
  return beta_ * total;
}

Eigen::VectorXd UltraRegularizer::gradient(const Eigen::VectorXd& x) const {
  const Image img(rows_, cols_, std::vector<double>(x.data(), x.data() + x.size()));
  const Eigen::MatrixXd p = extract_patches(img, cfg_);
  Eigen::MatrixXd gp(p.rows(), p.cols());
  for (int k = 0; k < un_->K(); ++k) {
    const auto& idx = members_[static_cast<std::size_t>(k)];
    if (idx.empty()) continue;
    Eigen::MatrixXd xk(p.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t t = 0; t < idx.size(); ++t) xk.col(static_cast<Eigen::Index>(t)) = p.col(idx[t]);
    const Eigen::MatrixXd r = gram_[static_cast<std::size_t>(k)] * xk - shift_[static_cast<std::size_t>(k)];
    for (std::size_t t = 0; t < idx.size(); ++t) gp.col(idx[t]) = r.col(static_cast<Eigen::Index>(t));
  }
  return 2.0 * beta_ * assemble_weighted(gp, cfg_, rows_, cols_, tau_).vec();
}

Eigen::VectorXd UltraRegularizer::majorizer() const { return compute_DR(beta_, *un_, tau_, cfg_, rows_, cols_); }

double UltraRegularizer::sparsity_term(double gamma) const {
  double total = 0.0;
  for (std::size_t j = 0; j < codes_.size(); ++j) {
    total += tau_at(j) * static_cast<double>((codes_.codes.col(static_cast<Eigen::Index>(j)).array() != 0.0).count());
  }
  return beta_ * gamma * gamma * total;
}

}  // namespace superct
