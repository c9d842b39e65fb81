#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "superct/image.hpp"

namespace superct {

inline constexpr double kPsnrCap = 99.0;

/// Root mean squared error in HU.
double rmse(const Image& est, const Image& ref);

/// 20 log10(peak / RMSE) in dB, capped at 99 dB. A non-positive peak selects
/// the maximum of the reference in display units (water = 1000).
double psnr(const Image& est, const Image& ref, double peak = 0.0);

/// Mean SSIM over all 8x8 windows in display units, L = dynamic range.
double ssim(const Image& est, const Image& ref, double dynamic_range = 400.0);

struct EvalEntry {
  std::string name;
  double rmse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::vector<EvalEntry> entries;
  EvalEntry aggregate() const;  // means over entries
  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  std::string to_csv() const;
};

EvalEntry evaluate(const std::string& name, const Image& est, const Image& ref);

}  // namespace superct
