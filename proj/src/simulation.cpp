#include "superct/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "superct/error.hpp"
#include "superct/io.hpp"
#include "superct/projector.hpp"

namespace superct {

namespace {

constexpr double kPoissonExactLimit = 1e12;

}  // namespace

void ScanProtocol::validate() const {
  if (!(I0 > 0.0)) throw ConfigError("protocol: I0 must be > 0");
  if (!(sigma >= 0.0)) throw ConfigError("protocol: sigma must be >= 0");
}

Sinogram simulate_counts(const Sinogram& line_integrals, const ScanProtocol& protocol,
                         std::vector<std::uint8_t>* clamped) {
  protocol.validate();
  if (line_integrals.kind != SinogramKind::line_integral) throw DimensionError("simulate_counts expects line integrals");
  Sinogram out(line_integrals.n_views, line_integrals.n_bins, SinogramKind::counts);
  const auto n = static_cast<std::int64_t>(out.size());
  if (clamped) clamped->assign(out.size(), 0);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const double l = line_integrals.values[static_cast<std::size_t>(i)];
    double e = -l;
    if (e > 700.0 || e < -700.0) {
      e = std::clamp(e, -700.0, 700.0);
      if (clamped) (*clamped)[static_cast<std::size_t>(i)] = 1;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(protocol.seed), static_cast<std::uint32_t>(protocol.seed >> 32),
                      static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(static_cast<std::uint64_t>(i) >> 32)};
    std::mt19937_64 rng(seq);
    const double mean = protocol.I0 * std::exp(e);
    double y = 0.0;
    if (mean > kPoissonExactLimit) {
      // Far beyond any real dose; the sampler does not terminate for such means.
      y = mean + std::sqrt(mean) * std::normal_distribution<double>(0.0, 1.0)(rng);
    } else if (mean > 0.0) {
      y = static_cast<double>(std::poisson_distribution<std::int64_t>(mean)(rng));
    }
    if (protocol.sigma > 0.0) y += std::normal_distribution<double>(0.0, protocol.sigma)(rng);
    out.values[static_cast<std::size_t>(i)] = y;
  }
  return out;
}

Sinogram post_log(const Sinogram& counts, double I0) {
  if (!(I0 > 0.0)) throw ConfigError("post_log: I0 must be > 0");
  Sinogram out(counts.n_views, counts.n_bins, SinogramKind::line_integral);
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = std::log(I0 / std::max(counts.values[i], kCountFloor));
  return out;
}

Sinogram statistical_weights(const Sinogram& counts, double sigma) {
  Sinogram out(counts.n_views, counts.n_bins, SinogramKind::weights);
  const double s2 = sigma * sigma;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double y = std::max(counts.values[i], kCountFloor);
    out.values[i] = y * y / (y + s2);
  }
  return out;
}

MeasurementSet simulate_measurements(const Sinogram& line_integrals, const ScanProtocol& protocol) {
  MeasurementSet m;
  m.protocol = protocol;
  m.counts = simulate_counts(line_integrals, protocol, &m.clamped);
  m.post_log = post_log(m.counts, protocol.I0);
  m.weights = statistical_weights(m.counts, protocol.sigma);
  return m;
}

MeasurementSet simulate_measurements(const Image& image, const Geometry& geom, const ScanProtocol& protocol) {
  return simulate_measurements(forward_project(image, geom), protocol);
}

void write_measurements(const std::filesystem::path& dir, const MeasurementSet& meas, const Geometry& geom) {
  std::filesystem::create_directories(dir);
  write_sinogram(dir / "counts.bin", meas.counts, geom);
  write_sinogram(dir / "postlog.bin", meas.post_log, geom);
  write_sinogram(dir / "weights.bin", meas.weights, geom);
  std::size_t n_clamped = 0;
  for (auto c : meas.clamped) n_clamped += c;
  write_json(dir / "measurement.json", json{{"I0", meas.protocol.I0},
                                            {"sigma", meas.protocol.sigma},
                                            {"seed", meas.protocol.seed},
                                            {"clamped_rays", n_clamped},
                                            {"geometry", geometry_to_json(geom)}});
}

MeasurementSet read_measurements(const std::filesystem::path& dir, Geometry* geom) {
  const json meta = read_json(dir / "measurement.json");
  MeasurementSet m;
  try {
    m.protocol.I0 = meta.at("I0").get<double>();
    m.protocol.sigma = meta.at("sigma").get<double>();
    m.protocol.seed = meta.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw FormatError("'" + (dir / "measurement.json").string() + "': " + e.what());
  }
  m.counts = read_sinogram(dir / "counts.bin", geom);
  m.post_log = read_sinogram(dir / "postlog.bin");
  m.weights = read_sinogram(dir / "weights.bin");
  if (m.post_log.size() != m.counts.size() || m.weights.size() != m.counts.size()) {
    throw FormatError("'" + dir.string() + "': measurement arrays differ in length");
  }
  m.clamped.assign(m.counts.size(), 0);
  return m;
}

}  // namespace superct
