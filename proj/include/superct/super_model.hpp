#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "superct/denoiser.hpp"
#include "superct/fbp.hpp"
#include "superct/pwls.hpp"

namespace superct {

enum class IterModule { none, pwls_ep, pwls_ultra, spultra };

const char* to_string(IterModule m);
IterModule iter_module_from_string(const std::string& s);

/// The unsupervised half of a super layer with its fixed iteration budget.
/// PWLS-EP runs oslalm.P passes; the ULTRA methods run ultra.outer_iters
/// alternations of ultra.inner.
struct IterConfig {
  IterModule module = IterModule::none;
  EpParams ep;
  OsLalmConfig oslalm;
  UltraParams ultra;
};

nlohmann::json iter_config_to_json(const IterConfig& c);
/// ULTRA transforms are read from `dir` / the recorded file name.
IterConfig iter_config_from_json(const nlohmann::json& j, const std::filesystem::path& dir);

Image run_iterative(const IterConfig& cfg, const SystemMatrix& A, const MeasurementSet& meas, const Image& init);

struct SuperLayer {
  ConvDenoiser net;
  IterConfig iter;
};

struct SuperModel {
  std::vector<SuperLayer> layers;
  std::uint64_t seed = 0;

  void save(const std::filesystem::path& dir) const;
  static SuperModel load(const std::filesystem::path& dir);
};

struct SuperTrainConfig {
  int n_layers = 15;
  TrainConfig sup;
  IterConfig iter;
  std::uint64_t seed = 0;
  FbpWindow window = FbpWindow::ram_lak;
};

struct SuperTrainResult {
  SuperModel model;
  std::vector<double> mean_rmse;  // FBP inputs first, then after each layer
  bool failed = false;            // model then holds the layers finished so far
  std::string error;
};

/// Greedy layer-by-layer training from FBP initializations.
SuperTrainResult train_super(const SystemMatrix& A, const Geometry& geom, const std::vector<MeasurementSet>& meas,
                             const std::vector<Image>& refs, const SuperTrainConfig& cfg);

/// Same, starting from given initial images.
SuperTrainResult train_super_from(const SystemMatrix& A, const std::vector<MeasurementSet>& meas,
                                  const std::vector<Image>& init, const std::vector<Image>& refs,
                                  const SuperTrainConfig& cfg);

struct SuperApplyResult {
  Image image;
  std::vector<Image> snapshots;  // one per layer
};

SuperApplyResult apply_super(const SuperModel& model, const SystemMatrix& A, const MeasurementSet& meas,
                             const Image& init);
SuperApplyResult apply_super(const SuperModel& model, const SystemMatrix& A, const Geometry& geom,
                             const MeasurementSet& meas, FbpWindow window = FbpWindow::ram_lak);

}  // namespace superct
