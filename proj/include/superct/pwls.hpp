#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "superct/geometry.hpp"
#include "superct/image.hpp"
#include "superct/oslalm.hpp"
#include "superct/patches.hpp"
#include "superct/projector.hpp"
#include "superct/simulation.hpp"
#include "superct/transform_union.hpp"

namespace superct {

struct SolveRecord {
  int iter = 0;
  double objective = 0.0;
  double rmse_hu = -1.0;  // negative when no reference was given
  double seconds = 0.0;   // wall clock since the solve started
};

struct SolveLog {
  std::vector<SolveRecord> records;
  double init_seconds = 0.0;  // majorizers, weights, surrogates
  double total_seconds = 0.0;
  void write_csv(const std::filesystem::path& path) const;
};

struct EpParams {
  double beta = 1.0;
  double delta_hu = 20.0;
  bool uniform_kappa = false;
};

/// PWLS with the edge-preserving penalty: 1/2||y - Ax||_W^2 + beta R_EP(x),
/// cfg.P passes of OS-LALM from `init`.
Image pwls_ep_reconstruct(const SystemMatrix& A, const MeasurementSet& meas, const EpParams& ep,
                          const OsLalmConfig& cfg, const Image& init, const Image* reference = nullptr,
                          SolveLog* log = nullptr);

struct UltraParams {
  double beta = 1.0;
  double gamma = 1.0;
  std::vector<double> tau;  // empty: tau == 1
  TransformUnion transforms;
  PatchConfig patch;
  int outer_iters = 1;
  OsLalmConfig inner;
};

struct UltraResult {
  Image image;
  CodeAssignment codes;
  bool diverged = false;  // image is then the last finite iterate
  std::string error;
};

/// Alternates sparse coding/clustering with OS-LALM image updates on
/// 1/2||y - Ax||_W^2 + beta sum_j tau_j ||Omega_{k_j} P_j x - z_j||^2.
UltraResult pwls_ultra_reconstruct(const SystemMatrix& A, const MeasurementSet& meas, const UltraParams& params,
                                   const Image& init, const Image* reference = nullptr, SolveLog* log = nullptr);

/// Codes every patch of `image` with threshold gamma.
CodeAssignment code_image(const Image& image, const UltraParams& params);

/// Objective with fixed codes: 1/2||y - Ax||_W^2 + ULTRA penalty incl. the l0 term.
double pwls_ultra_objective(const SystemMatrix& A, const MeasurementSet& meas, const UltraParams& params,
                            const Image& x, const CodeAssignment& codes);

}  // namespace superct
