#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "superct/geometry.hpp"
#include "superct/image.hpp"

namespace superct {

inline constexpr double kCountFloor = 0.1;

struct ScanProtocol {
  double I0 = 1e5;     // incident photons per ray
  double sigma = 5.0;  // electronic noise std, counts
  std::uint64_t seed = 0;
  void validate() const;
};

struct MeasurementSet {
  Sinogram counts;
  Sinogram post_log;
  Sinogram weights;
  ScanProtocol protocol;
  std::vector<std::uint8_t> clamped;  // rays whose exponent was clamped
};

/// Y_i = Poisson(I0 exp(-l_i)) + N(0, sigma^2); one RNG stream per ray, seeded
/// from (seed, ray index).
Sinogram simulate_counts(const Sinogram& line_integrals, const ScanProtocol& protocol,
                         std::vector<std::uint8_t>* clamped = nullptr);

/// ln(I0 / max(Y, 0.1)).
Sinogram post_log(const Sinogram& counts, double I0);

/// Y~^2 / (Y~ + sigma^2) with Y~ = max(Y, 0.1).
Sinogram statistical_weights(const Sinogram& counts, double sigma);

MeasurementSet simulate_measurements(const Sinogram& line_integrals, const ScanProtocol& protocol);
MeasurementSet simulate_measurements(const Image& image, const Geometry& geom, const ScanProtocol& protocol);

/// Directory with counts.bin, postlog.bin, weights.bin and a measurement.json.
void write_measurements(const std::filesystem::path& dir, const MeasurementSet& meas, const Geometry& geom);
MeasurementSet read_measurements(const std::filesystem::path& dir, Geometry* geom = nullptr);

}  // namespace superct
