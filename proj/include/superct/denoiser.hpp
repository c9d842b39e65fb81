#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "superct/image.hpp"

namespace superct {

struct TrainConfig {
  int epochs = 10;
  double lr_start = 1e-1;  // for the per-pixel mean loss in water units
  double lr_end = 1e-2;
  double momentum = 0.99;
  double init_std = 0.07071067811865475;  // variance 0.005
  int crop = 32;
  int crops_per_pair = 32;
  std::uint64_t seed = 0;
  void validate() const;
};

struct TrainResult {
  std::vector<double> loss;  // full-image mean loss before training, then after each epoch
};

/// Residual 3x3 CNN, widths 1-16-16-16-1, rectifiers between layers, zero
/// padding. Works on images scaled by 1/mu_water:
/// out = x + mu_water * net(x / mu_water).
class ConvDenoiser {
public:
  static constexpr int kLayers = 4;
  static constexpr std::array<int, kLayers + 1> kWidths = {1, 16, 16, 16, 1};

  ConvDenoiser();

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t weight_offset(int layer) const { return offsets_[static_cast<std::size_t>(layer)]; }
  std::size_t bias_offset(int layer) const;

  /// Rectifiers off makes the network affine (used by tests).
  bool relu = true;

  void init_random(std::uint64_t seed, double stddev);
  void zero();

  Image apply(const Image& x) const;

  /// Mean squared error between apply(x) and ref in normalized units.
  double loss(const Image& x, const Image& ref) const;
  /// Same loss and its gradient with respect to params().
  double loss_and_gradient(const Image& x, const Image& ref, std::vector<double>& grad) const;

  /// Rounds every parameter to float precision (the stored precision).
  void round_to_float();

  void save(const std::filesystem::path& path) const;
  static ConvDenoiser load(const std::filesystem::path& path);

private:
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

/// SGD with momentum on random crops, one crop per step, learning rate
/// decreasing log-linearly from lr_start to lr_end across epochs.
TrainResult denoiser_train(ConvDenoiser& net, const std::vector<std::pair<Image, Image>>& pairs,
                           const TrainConfig& cfg);

}  // namespace superct
