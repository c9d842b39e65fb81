#include "superct/transform_union.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <Eigen/LU>

#include "superct/error.hpp"
#include "superct/io.hpp"

namespace superct {

namespace {

constexpr char kUnionMagic[9] = "SUPERCTU";
constexpr char kCodeMagic[9] = "SUPERCTC";

}  // namespace

void TransformUnion::validate() const {
  if (patch_side < 1) throw ConfigError("transform union: patch_side must be >= 1");
  if (transforms.empty()) throw ConfigError("transform union: K must be >= 1");
  for (std::size_t k = 0; k < transforms.size(); ++k) {
    const auto& om = transforms[k];
    if (om.rows() != dim() || om.cols() != dim()) throw ConfigError("transform union: member " + std::to_string(k) + " is not " + std::to_string(dim()) + "x" + std::to_string(dim()));
    if (!om.allFinite()) throw ConfigError("transform union: member " + std::to_string(k) + " has non-finite entries");
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(om);
    const auto& m = lu.matrixLU();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (m(i, i) == 0.0) throw ConfigError("transform union: member " + std::to_string(k) + " is singular");
    }
  }
}

Eigen::MatrixXd dct2_matrix(int side) {
  Eigen::MatrixXd c(side, side);
  for (int k = 0; k < side; ++k) {
    const double a = k == 0 ? std::sqrt(1.0 / side) : std::sqrt(2.0 / side);
    for (int n = 0; n < side; ++n) c(k, n) = a * std::cos(std::numbers::pi * (n + 0.5) * k / side);
  }
  const int d = side * side;
  Eigen::MatrixXd out(d, d);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j)
      for (int k = 0; k < side; ++k)
        for (int l = 0; l < side; ++l) out(i * side + j, k * side + l) = c(i, k) * c(j, l);
  return out;
}

TransformUnion TransformUnion::dct(int K, int patch_side) {
  if (K < 1) throw ConfigError("K must be >= 1");
  TransformUnion u;
  u.patch_side = patch_side;
  u.transforms.assign(static_cast<std::size_t>(K), dct2_matrix(patch_side));
  return u;
}

double sparse_coding_cost(const Eigen::VectorXd& v, double gamma) {
  const double g2 = gamma * gamma;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::abs(v[i]) >= gamma ? g2 : v[i] * v[i];
  return s;
}

CodeResult code_and_cluster(const Eigen::VectorXd& u, const TransformUnion& un, double gamma, const double* extra) {
  if (u.size() != un.dim()) throw DimensionError("code_and_cluster: patch length mismatch");
  if (!(gamma >= 0.0)) throw ConfigError("code_and_cluster: gamma must be >= 0");
  CodeResult best;
  best.cost = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_v;
  for (int k = 0; k < un.K(); ++k) {
    Eigen::VectorXd v = un.transforms[static_cast<std::size_t>(k)] * u;
    double c = sparse_coding_cost(v, gamma);
    if (extra) c += extra[k];
    if (c < best.cost) {
      best.cost = c;
      best.label = k;
      best_v = std::move(v);
    }
  }
  if (best_v.size() == 0) {
    // Every cost was infinite or NaN.
    throw NumericalError("code_and_cluster: no finite class cost");
  }
  best.code = hard_threshold(best_v, gamma);
  return best;
}

CodeAssignment code_and_cluster_all(const Eigen::MatrixXd& patches, const TransformUnion& un, double gamma) {
  if (patches.rows() != un.dim()) throw DimensionError("code_and_cluster_all: patch length mismatch");
  const Eigen::Index n = patches.cols();
  CodeAssignment a;
  a.K = un.K();
  a.labels.resize(static_cast<std::size_t>(n));
  a.costs.resize(static_cast<std::size_t>(n));
  a.codes.resize(un.dim(), n);
  // Per-class transforms of all patches at once, then a per-patch choice.
  std::vector<Eigen::MatrixXd> tv(static_cast<std::size_t>(un.K()));
  for (int k = 0; k < un.K(); ++k) tv[static_cast<std::size_t>(k)].noalias() = un.transforms[static_cast<std::size_t>(k)] * patches;
  const double g2 = gamma * gamma;
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < n; ++j) {
    double best = std::numeric_limits<double>::infinity();
    int label = 0;
    for (int k = 0; k < un.K(); ++k) {
      const auto& m = tv[static_cast<std::size_t>(k)];
      double c = 0.0;
      for (Eigen::Index i = 0; i < m.rows(); ++i) c += std::abs(m(i, j)) >= gamma ? g2 : m(i, j) * m(i, j);
      if (c < best) {
        best = c;
        label = k;
      }
    }
    const auto& m = tv[static_cast<std::size_t>(label)];
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.codes(i, j) = std::abs(m(i, j)) >= gamma ? m(i, j) : 0.0;
    a.labels[static_cast<std::size_t>(j)] = label;
    a.costs[static_cast<std::size_t>(j)] = best;
  }
  return a;
}

std::vector<int> cluster_map(const CodeAssignment& a, const PatchConfig& cfg, int rows, int cols) {
  cfg.validate(rows, cols);
  const int pr = cfg.per_col(rows), pc = cfg.per_row(cols);
  if (a.size() != static_cast<std::size_t>(pr) * pc) throw DimensionError("cluster_map: assignment size mismatch");
  std::vector<int> votes(static_cast<std::size_t>(rows) * cols * a.K, 0);
  for (int p = 0; p < pr; ++p) {
    for (int q = 0; q < pc; ++q) {
      const int k = a.labels[static_cast<std::size_t>(p) * pc + q];
      for (int i = 0; i < cfg.side; ++i)
        for (int j = 0; j < cfg.side; ++j) {
          const std::size_t pix = static_cast<std::size_t>(p * cfg.stride + i) * cols + (q * cfg.stride + j);
          ++votes[pix * a.K + k];
        }
    }
  }
  std::vector<int> out(static_cast<std::size_t>(rows) * cols, -1);
  for (std::size_t pix = 0; pix < out.size(); ++pix) {
    int best = 0;
    for (int k = 0; k < a.K; ++k) {
      const int v = votes[pix * a.K + k];
      if (v > best) {
        best = v;
        out[pix] = k;
      }
    }
  }
  return out;
}

void write_union(const std::filesystem::path& path, const TransformUnion& un) {
  un.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path.string() + "' for writing");
  put_magic(os, kUnionMagic);
  put_u32(os, kFormatVersion);
  put_u32(os, static_cast<std::uint32_t>(un.K()));
  put_u32(os, static_cast<std::uint32_t>(un.patch_side));
  for (const auto& om : un.transforms)
    for (Eigen::Index i = 0; i < om.rows(); ++i)
      for (Eigen::Index j = 0; j < om.cols(); ++j) put_f64(os, om(i, j));
}

TransformUnion read_union(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path.string() + "'");
  expect_magic(is, kUnionMagic, path);
  if (get_u32(is) != kFormatVersion) throw FormatError("'" + path.string() + "': unsupported version");
  const auto K = get_u32(is);
  const auto side = get_u32(is);
  if (K == 0 || K > 4096 || side == 0 || side > 64) throw FormatError("'" + path.string() + "': corrupt header");
  TransformUnion un;
  un.patch_side = static_cast<int>(side);
  for (std::uint32_t k = 0; k < K; ++k) {
    Eigen::MatrixXd om(un.dim(), un.dim());
    for (Eigen::Index i = 0; i < om.rows(); ++i)
      for (Eigen::Index j = 0; j < om.cols(); ++j) om(i, j) = get_f64(is);
    un.transforms.push_back(std::move(om));
  }
  if (!is) throw FormatError("'" + path.string() + "': truncated");
  try {
    un.validate();
  } catch (const ConfigError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
  return un;
}

void write_assignment(const std::filesystem::path& path, const CodeAssignment& a) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path.string() + "' for writing");
  put_magic(os, kCodeMagic);
  put_u32(os, kFormatVersion);
  put_u32(os, static_cast<std::uint32_t>(a.K));
  put_u32(os, static_cast<std::uint32_t>(a.codes.rows()));
  put_u32(os, static_cast<std::uint32_t>(a.size()));
  for (std::size_t j = 0; j < a.size(); ++j) {
    put_u32(os, static_cast<std::uint32_t>(a.labels[j]));
    put_f64(os, a.costs[j]);
    for (Eigen::Index i = 0; i < a.codes.rows(); ++i) put_f64(os, a.codes(i, static_cast<Eigen::Index>(j)));
  }
}

CodeAssignment read_assignment(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path.string() + "'");
  expect_magic(is, kCodeMagic, path);
  if (get_u32(is) != kFormatVersion) throw FormatError("'" + path.string() + "': unsupported version");
  CodeAssignment a;
  a.K = static_cast<int>(get_u32(is));
  const auto d = get_u32(is);
  const auto n = get_u32(is);
  if (a.K < 1 || d == 0 || d > 4096) throw FormatError("'" + path.string() + "': corrupt header");
  a.labels.resize(n);
  a.costs.resize(n);
  a.codes.resize(d, n);
  for (std::uint32_t j = 0; j < n; ++j) {
    a.labels[j] = static_cast<int>(get_u32(is));
    a.costs[j] = get_f64(is);
    for (std::uint32_t i = 0; i < d; ++i) a.codes(i, j) = get_f64(is);
    if (a.labels[j] < 0 || a.labels[j] >= a.K) throw FormatError("'" + path.string() + "': label out of range");
  }
  if (!is) throw FormatError("'" + path.string() + "': truncated");
  return a;
}

}  // namespace superct
