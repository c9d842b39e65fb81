#include "superct/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "superct/error.hpp"

namespace superct {

namespace {

void check_same(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionError("metric inputs differ in shape");
}

}  // namespace

double rmse(const Image& est, const Image& ref) {
  check_same(est, ref);
  if (est.size() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double d = to_hu(est.values[i], ref.mu_water) - to_hu(ref.values[i], ref.mu_water);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(est.size()));
}

double psnr(const Image& est, const Image& ref, double peak) {
  check_same(est, ref);
  if (!(peak > 0.0)) {
    peak = 0.0;
    for (double v : ref.values) peak = std::max(peak, to_display(v, ref.mu_water));
  }
  const double e = rmse(est, ref);
  if (e == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 20.0 * std::log10(peak / e));
}

double ssim(const Image& est, const Image& ref, double dynamic_range) {
  check_same(est, ref);
  constexpr int kWin = 8;
  const int rows = est.rows, cols = est.cols;
  if (rows < kWin || cols < kWin) throw DimensionError("ssim needs at least 8x8 images");
  const double c1 = std::pow(0.01 * dynamic_range, 2), c2 = std::pow(0.03 * dynamic_range, 2);
  const int nr = rows - kWin + 1, nc = cols - kWin + 1;
  std::vector<double> per_row(static_cast<std::size_t>(nr));
#pragma omp parallel for schedule(static)
  for (int r = 0; r < nr; ++r) {
    double acc = 0.0;
    for (int c = 0; c < nc; ++c) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          const double a = to_display(est(r + i, c + j), ref.mu_water);
          const double b = to_display(ref(r + i, c + j), ref.mu_water);
          sa += a;
          sb += b;
          saa += a * a;
          sbb += b * b;
          sab += a * b;
        }
      const double n = kWin * kWin;
      const double ma = sa / n, mb = sb / n;
      const double va = std::max(saa / n - ma * ma, 0.0), vb = std::max(sbb / n - mb * mb, 0.0);
      const double cov = sab / n - ma * mb;
      acc += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    per_row[static_cast<std::size_t>(r)] = acc;
  }
  double total = 0.0;
  for (double v : per_row) total += v;
  return total / (static_cast<double>(nr) * nc);
}

EvalEntry evaluate(const std::string& name, const Image& est, const Image& ref) {
  return {name, rmse(est, ref), psnr(est, ref), ssim(est, ref)};
}

EvalEntry EvalReport::aggregate() const {
  EvalEntry a{"mean", 0, 0, 0};
  if (entries.empty()) return a;
  for (const auto& e : entries) {
    a.rmse += e.rmse;
    a.psnr += e.psnr;
    a.ssim += e.ssim;
  }
  const double n = static_cast<double>(entries.size());
  a.rmse /= n;
  a.psnr /= n;
  a.ssim /= n;
  return a;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) arr.push_back({{"name", e.name}, {"rmse_hu", e.rmse}, {"psnr_db", e.psnr}, {"ssim", e.ssim}});
  const auto a = aggregate();
  return {{"entries", arr}, {"aggregate", {{"rmse_hu", a.rmse}, {"psnr_db", a.psnr}, {"ssim", a.ssim}}}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    for (const auto& e : j.at("entries")) {
      r.entries.push_back({e.at("name").get<std::string>(), e.at("rmse_hu").get<double>(), e.at("psnr_db").get<double>(),
                           e.at("ssim").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("eval report: ") + e.what());
  }
  return r;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "name,rmse_hu,psnr_db,ssim\n";
  for (const auto& e : entries) os << e.name << ',' << e.rmse << ',' << e.psnr << ',' << e.ssim << '\n';
  return os.str();
}

}  // namespace superct
