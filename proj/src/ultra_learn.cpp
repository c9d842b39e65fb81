#include "superct/ultra_learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "superct/error.hpp"

namespace superct {

double q_penalty(const Eigen::MatrixXd& omega) {
  if (omega.rows() != omega.cols()) throw DimensionError("q_penalty: matrix is not square");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(omega);
  const auto& m = lu.matrixLU();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double a = std::abs(m(i, i));
    if (a == 0.0) return std::numeric_limits<double>::infinity();
    logdet += std::log(a);
  }
  return omega.squaredNorm() - logdet;
}

Eigen::MatrixXd transform_update(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z, double lambda) {
  if (X.cols() == 0) throw DimensionError("transform_update: empty class");
  if (X.rows() != Z.rows() || X.cols() != Z.cols()) throw DimensionError("transform_update: X and Z differ in shape");
  if (!(lambda > 0.0)) throw ConfigError("transform_update: lambda must be > 0");
  const Eigen::Index d = X.rows();
  Eigen::MatrixXd g = X * X.transpose();
  g.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "transform_update: Cholesky failed (lambda=" << lambda << ", trace=" << g.trace() << ")";
    throw NumericalError(msg.str());
  }
  const Eigen::MatrixXd l_inv = llt.matrixL().solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::MatrixXd b = l_inv * (X * Z.transpose());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd s = svd.singularValues();
  const Eigen::VectorXd mid = 0.5 * (s.array() + (s.array().square() + 2.0 * lambda).sqrt()).matrix();
  Eigen::MatrixXd omega = svd.matrixV() * mid.asDiagonal() * svd.matrixU().transpose() * l_inv;
  if (!omega.allFinite()) {
    std::ostringstream msg;
    msg << "transform_update: non-finite result (max singular value " << (s.size() ? s[0] : 0.0) << ")";
    throw NumericalError(msg.str());
  }
  return omega;
}

double learning_objective(const Eigen::MatrixXd& X, const TransformUnion& un, const std::vector<int>& labels,
                          const Eigen::MatrixXd& Z, double eta, double lambda0) {
  const int K = un.K();
  std::vector<double> q(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) q[static_cast<std::size_t>(k)] = q_penalty(un.transforms[static_cast<std::size_t>(k)]);
  double total = 0.0;
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    const int k = labels[static_cast<std::size_t>(i)];
    const auto& om = un.transforms[static_cast<std::size_t>(k)];
    const double fit = (om * X.col(i) - Z.col(i)).squaredNorm();
    const double nnz = static_cast<double>((Z.col(i).array() != 0.0).count());
    total += fit + eta * nnz + lambda0 * X.col(i).squaredNorm() * q[static_cast<std::size_t>(k)];
  }
  return total;
}

double default_eta(const Eigen::MatrixXd& X) {
  const double range = X.size() ? X.maxCoeff() - X.minCoeff() : 0.0;
  const double e = 0.1 * range;
  return e > 0.0 ? e * e : 1e-12;
}

namespace {

struct Members {
  Eigen::MatrixXd X;
  Eigen::MatrixXd Z;
};

Members gather(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z, const std::vector<int>& idx) {
  Members m{Eigen::MatrixXd(X.rows(), static_cast<Eigen::Index>(idx.size())),
            Eigen::MatrixXd(Z.rows(), static_cast<Eigen::Index>(idx.size()))};
  for (std::size_t t = 0; t < idx.size(); ++t) {
    m.X.col(static_cast<Eigen::Index>(t)) = X.col(idx[t]);
    m.Z.col(static_cast<Eigen::Index>(t)) = Z.col(idx[t]);
  }
  return m;
}

}  // namespace

LearnResult learn_union(const Eigen::MatrixXd& X, const LearnConfig& cfg) {
  if (cfg.K < 1) throw ConfigError("learn: K must be >= 1");
  if (!(cfg.lambda0 > 0.0)) throw ConfigError("learn: lambda0 must be > 0");
  if (cfg.n_iters < 0) throw ConfigError("learn: n_iters must be >= 0");
  const int d = cfg.patch.dim();
  if (X.rows() != d) throw DimensionError("learn: patch length does not match patch side");
  const Eigen::Index n = X.cols();
  if (n < static_cast<Eigen::Index>(cfg.K) * d) {
    throw DimensionError("learn: need at least K*d = " + std::to_string(cfg.K * d) + " patches, got " + std::to_string(n));
  }
  if (!X.allFinite()) throw NumericalError("learn: non-finite patches");

  LearnResult res;
  res.eta = cfg.eta > 0.0 ? cfg.eta : default_eta(X);
  const double gamma = std::sqrt(res.eta);
  res.transforms = TransformUnion::dct(cfg.K, cfg.patch.side);
  res.labels.resize(static_cast<std::size_t>(n));
  std::mt19937_64 rng(cfg.seed);
  for (auto& l : res.labels) l = static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.K));

  const Eigen::VectorXd energy = X.colwise().squaredNorm().transpose();
  res.codes.resize(d, n);
  std::vector<double> cost(static_cast<std::size_t>(n));
  auto recode_fixed = [&]() {
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& om = res.transforms.transforms[static_cast<std::size_t>(res.labels[static_cast<std::size_t>(i)])];
      const Eigen::VectorXd v = om * X.col(i);
      res.codes.col(i) = hard_threshold(v, gamma);
      cost[static_cast<std::size_t>(i)] = sparse_coding_cost(v, gamma);
    }
  };
  recode_fixed();
  res.objective.push_back(learning_objective(X, res.transforms, res.labels, res.codes, res.eta, cfg.lambda0));

  for (int it = 0; it < cfg.n_iters; ++it) {
    std::vector<std::vector<int>> members(static_cast<std::size_t>(cfg.K));
    for (Eigen::Index i = 0; i < n; ++i) members[static_cast<std::size_t>(res.labels[static_cast<std::size_t>(i)])].push_back(static_cast<int>(i));

    // Transform update per class.
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < cfg.K; ++k) {
      const auto& idx = members[static_cast<std::size_t>(k)];
      if (idx.empty()) continue;
      const Members m = gather(X, res.codes, idx);
      double lambda = 0.0;
      for (int i : idx) lambda += energy[i];
      lambda *= cfg.lambda0;
      if (!(lambda > 0.0)) continue;  // all-zero patches: any transform fits
      res.transforms.transforms[static_cast<std::size_t>(k)] = transform_update(m.X, m.Z, lambda);
    }

    // Empty classes are refit to the worst-coded 1% of patches. The class has
    // no members, so this leaves the objective unchanged.
    for (int k = 0; k < cfg.K; ++k) {
      if (!members[static_cast<std::size_t>(k)].empty()) continue;
      std::vector<int> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      const std::size_t take = std::max<std::size_t>(static_cast<std::size_t>(d), static_cast<std::size_t>(n) / 100);
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                        [&](int a, int b) { return cost[static_cast<std::size_t>(a)] > cost[static_cast<std::size_t>(b)] || (cost[static_cast<std::size_t>(a)] == cost[static_cast<std::size_t>(b)] && a < b); });
      order.resize(take);
      Members m = gather(X, res.codes, order);
      double lambda = 0.0;
      for (int i : order) lambda += energy[i];
      lambda *= cfg.lambda0;
      if (!(lambda > 0.0)) continue;
      Eigen::MatrixXd om = dct2_matrix(cfg.patch.side);
      for (int rep = 0; rep < 3; ++rep) {
        for (Eigen::Index t = 0; t < m.X.cols(); ++t) m.Z.col(t) = hard_threshold(om * m.X.col(t), gamma);
        om = transform_update(m.X, m.Z, lambda);
      }
      res.transforms.transforms[static_cast<std::size_t>(k)] = om;
    }

    // Joint clustering and sparse coding, including each class's share of the
    // conditioning penalty.
    std::vector<double> q(static_cast<std::size_t>(cfg.K));
    for (int k = 0; k < cfg.K; ++k) q[static_cast<std::size_t>(k)] = q_penalty(res.transforms.transforms[static_cast<std::size_t>(k)]);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      std::vector<double> extra(static_cast<std::size_t>(cfg.K));
      for (int k = 0; k < cfg.K; ++k) extra[static_cast<std::size_t>(k)] = cfg.lambda0 * energy[i] * q[static_cast<std::size_t>(k)];
      const CodeResult r = code_and_cluster(X.col(i), res.transforms, gamma, extra.data());
      res.labels[static_cast<std::size_t>(i)] = r.label;
      res.codes.col(i) = r.code;
      cost[static_cast<std::size_t>(i)] = r.cost;
    }
    res.objective.push_back(learning_objective(X, res.transforms, res.labels, res.codes, res.eta, cfg.lambda0));
  }
  return res;
}

Eigen::MatrixXd training_patches(const std::vector<Image>& images, const PatchConfig& cfg) {
  std::vector<Eigen::MatrixXd> parts;
  Eigen::Index total = 0;
  for (const auto& img : images) {
    parts.push_back(extract_patches(img, cfg));
    total += parts.back().cols();
  }
  Eigen::MatrixXd out(cfg.dim(), total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p;
    at += p.cols();
  }
  return out;
}

}  // namespace superct
