#include "superct/patches.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "superct/error.hpp"

namespace superct {

void PatchConfig::validate(int rows, int cols) const {
  if (side < 1) throw ConfigError("patch side must be >= 1");
  if (stride < 1) throw ConfigError("patch stride must be >= 1");
  if (side > rows || side > cols) {
    throw DimensionError("patch side " + std::to_string(side) + " exceeds image " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
}

Eigen::MatrixXd extract_patches(const Image& image, const PatchConfig& cfg) {
  cfg.validate(image.rows, image.cols);
  const int pr = cfg.per_col(image.rows), pc = cfg.per_row(image.cols);
  Eigen::MatrixXd out(cfg.dim(), static_cast<Eigen::Index>(pr) * pc);
#pragma omp parallel for schedule(static)
  for (int a = 0; a < pr; ++a) {
    for (int b = 0; b < pc; ++b) {
      const Eigen::Index j = static_cast<Eigen::Index>(a) * pc + b;
      const int r0 = a * cfg.stride, c0 = b * cfg.stride;
      for (int i = 0; i < cfg.side; ++i) {
        for (int k = 0; k < cfg.side; ++k) out(i * cfg.side + k, j) = image(r0 + i, c0 + k);
      }
    }
  }
  return out;
}

Image assemble_weighted(const Eigen::MatrixXd& patches, const PatchConfig& cfg, int rows, int cols,
                        const std::vector<double>& tau, double mu_water) {
  cfg.validate(rows, cols);
  const int pr = cfg.per_col(rows), pc = cfg.per_row(cols);
  const Eigen::Index n = static_cast<Eigen::Index>(pr) * pc;
  if (patches.cols() != n || patches.rows() != cfg.dim()) throw DimensionError("assemble_weighted: patch matrix shape mismatch");
  if (!tau.empty() && static_cast<Eigen::Index>(tau.size()) != n) throw DimensionError("assemble_weighted: tau length mismatch");
  Image out(rows, cols, mu_water);
  // Each image row only receives patches whose top edge lies within side rows above it.
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int a_hi = std::min(pr - 1, r / cfg.stride);
    const int a_lo = r - cfg.side + 1 <= 0 ? 0 : (r - cfg.side + cfg.stride) / cfg.stride;
    for (int a = a_lo; a <= a_hi; ++a) {
      const int i = r - a * cfg.stride;
      if (i >= cfg.side) continue;
      for (int b = 0; b < pc; ++b) {
        const Eigen::Index j = static_cast<Eigen::Index>(a) * pc + b;
        const double t = tau.empty() ? 1.0 : tau[static_cast<std::size_t>(j)];
        if (t == 0.0) continue;
        const int c0 = b * cfg.stride;
        for (int k = 0; k < cfg.side; ++k) out(r, c0 + k) += t * patches(i * cfg.side + k, j);
      }
    }
  }
  return out;
}

Eigen::VectorXd patch_coverage(const PatchConfig& cfg, int rows, int cols, const std::vector<double>& tau) {
  const Eigen::Index n = static_cast<Eigen::Index>(cfg.count(rows, cols));
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(cfg.dim(), n);
  return assemble_weighted(ones, cfg, rows, cols, tau).vec();
}

Eigen::VectorXd hard_threshold(const Eigen::VectorXd& v, double gamma) {
  if (!(gamma >= 0.0)) throw ConfigError("hard_threshold: gamma must be >= 0");
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = std::abs(v[i]) >= gamma ? v[i] : 0.0;
  return out;
}

}  // namespace superct
