#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "superct/denoiser.hpp"
#include "superct/fbp.hpp"
#include "superct/geometry.hpp"
#include "superct/pwls.hpp"
#include "superct/simulation.hpp"
#include "superct/super_model.hpp"
#include "superct/ultra_learn.hpp"

namespace superct {

struct PhantomSpec {
  std::string kind = "shepp-logan";  // or "random"
  std::uint64_t seed = 0;
};

/// Parsed experiment document. Every section is optional; missing keys take
/// desk defaults and unknown keys are rejected.
struct ExperimentConfig {
  double mu_water = kDefaultMuWater;
  Geometry geometry = Geometry::desk_default();
  ScanProtocol protocol;
  PhantomSpec phantom;
  FbpWindow window = FbpWindow::ram_lak;
  IterConfig ep;     // module pwls-ep
  IterConfig ultra;  // module pwls-ultra; transforms loaded separately
  LearnConfig learn;
  TrainConfig train;
  int super_layers = 15;
  IterModule super_module = IterModule::pwls_ep;
  std::uint64_t super_seed = 0;
  double super_beta = -1.0;  // negative: the module's own beta
  int super_iterations = 4;  // EP passes or ULTRA outer iterations per layer

  nlohmann::json source;  // the document as given
};

/// Throws ConfigError naming the offending key.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Iterative module of a super layer: the standalone module settings with the
/// super section's beta and iteration budget. ULTRA transforms are left empty.
IterConfig super_layer_config(const ExperimentConfig& c);

/// Canonical hash of a config document.
std::uint64_t config_hash(const nlohmann::json& j);

}  // namespace superct
