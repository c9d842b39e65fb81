#include "superct/fbp.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <fftw3.h>

#include "superct/error.hpp"

namespace superct {

namespace {

constexpr double kPi = std::numbers::pi;

int padded_length(int n_bins) {
  int n = 1;
  while (n < 2 * n_bins) n *= 2;
  return n;
}

// Spatial-domain band-limited ramp, sample spacing tau.
double ramp(int n, double tau) {
  if (n == 0) return 1.0 / (4.0 * tau * tau);
  if (n % 2 == 0) return 0.0;
  return -1.0 / (n * n * kPi * kPi * tau * tau);
}

class Filter {
public:
  // kernel(n) for n in [-(n_bins-1), n_bins-1]; result is scaled by tau.
  template <class Kernel>
  Filter(int n_bins, double tau, FbpWindow window, Kernel kernel)
      : n_bins_(n_bins), n_(padded_length(n_bins)), tau_(tau) {
    real_ = fftw_alloc_real(static_cast<std::size_t>(n_));
    spec_ = fftw_alloc_complex(static_cast<std::size_t>(n_ / 2 + 1));
    fwd_ = fftw_plan_dft_r2c_1d(n_, real_, spec_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(n_, spec_, real_, FFTW_ESTIMATE);

    for (int i = 0; i < n_; ++i) real_[i] = 0.0;
    for (int k = -(n_bins - 1); k <= n_bins - 1; ++k) real_[(k + n_) % n_] = kernel(k);
    fftw_execute(fwd_);
    response_.resize(static_cast<std::size_t>(n_ / 2 + 1));
    for (int k = 0; k <= n_ / 2; ++k) {
      double w = 1.0;
      if (window == FbpWindow::hann) w = 0.5 * (1.0 + std::cos(2.0 * kPi * k / n_));
      response_[static_cast<std::size_t>(k)] = std::complex<double>(spec_[k][0], spec_[k][1]) * w;
    }
  }
  ~Filter() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(real_);
    fftw_free(spec_);
  }
  Filter(const Filter&) = delete;
  Filter& operator=(const Filter&) = delete;

  void apply(const double* in, double* out) {
    for (int i = 0; i < n_; ++i) real_[i] = i < n_bins_ ? in[i] : 0.0;
    fftw_execute(fwd_);
    for (int k = 0; k <= n_ / 2; ++k) {
      const std::complex<double> v = std::complex<double>(spec_[k][0], spec_[k][1]) * response_[static_cast<std::size_t>(k)];
      spec_[k][0] = v.real();
      spec_[k][1] = v.imag();
    }
    fftw_execute(inv_);
    for (int i = 0; i < n_bins_; ++i) out[i] = real_[i] * tau_ / n_;
  }

private:
  int n_bins_;
  int n_;
  double tau_;
  double* real_;
  fftw_complex* spec_;
  fftw_plan fwd_;
  fftw_plan inv_;
  std::vector<std::complex<double>> response_;
};

double interp(const double* q, int n_bins, double t) {
  if (!(t >= 0.0) || t > n_bins - 1) return 0.0;
  const int i0 = static_cast<int>(t);
  if (i0 >= n_bins - 1) return q[n_bins - 1];
  const double f = t - i0;
  return (1.0 - f) * q[i0] + f * q[i0 + 1];
}

}  // namespace

FbpWindow fbp_window_from_string(const std::string& s) {
  if (s == "ram-lak") return FbpWindow::ram_lak;
  if (s == "hann") return FbpWindow::hann;
  throw ConfigError("unknown FBP window '" + s + "' (expected ram-lak or hann)");
}

FbpResult fbp_reconstruct(const Sinogram& sino, const Geometry& geom, FbpWindow window) {
  if (sino.kind != SinogramKind::line_integral) throw DimensionError("fbp expects a line-integral sinogram");
  if (sino.n_views != geom.n_views || sino.n_bins != geom.n_bins || sino.size() != geom.n_rays()) {
    throw DimensionError("sinogram shape does not match geometry");
  }
  const int nv = geom.n_views, nb = geom.n_bins;
  const double tau = geom.bin_spacing;
  std::vector<double> q(sino.size());

  const bool fan = geom.kind == GeometryKind::fan_arc;
  if (fan) {
    Filter filt(nb, tau, window, [tau](int n) {
      if (n == 0) return ramp(0, tau);
      const double g = n * tau;
      const double r = g / std::sin(g);
      return r * r * ramp(n, tau);
    });
    std::vector<double> row(static_cast<std::size_t>(nb));
    for (int v = 0; v < nv; ++v) {
      for (int k = 0; k < nb; ++k) {
        row[static_cast<std::size_t>(k)] = sino.at(v, k) * geom.source_to_iso * std::cos(geom.bin_offset(k));
      }
      filt.apply(row.data(), q.data() + static_cast<std::size_t>(v) * nb);
    }
  } else {
    Filter filt(nb, tau, window, [tau](int n) { return ramp(n, tau); });
    for (int v = 0; v < nv; ++v) {
      filt.apply(sino.values.data() + static_cast<std::size_t>(v) * nb, q.data() + static_cast<std::size_t>(v) * nb);
    }
  }

  std::vector<double> cs(static_cast<std::size_t>(nv)), sn(static_cast<std::size_t>(nv));
  for (int v = 0; v < nv; ++v) {
    cs[static_cast<std::size_t>(v)] = std::cos(geom.view_angles[static_cast<std::size_t>(v)]);
    sn[static_cast<std::size_t>(v)] = std::sin(geom.view_angles[static_cast<std::size_t>(v)]);
  }
  const double dtheta = (fan ? 2.0 * kPi : kPi) / nv;
  const double center = 0.5 * (nb - 1);
  const double ps = geom.pixel_size;
  const double rs = geom.source_to_iso;

  FbpResult res{Image(geom.image_rows, geom.image_cols), nv < 8};
  Image& img = res.image;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < img.rows; ++r) {
    const double y = (0.5 * (img.rows - 1) - r) * ps;
    for (int c = 0; c < img.cols; ++c) {
      const double x = (c - 0.5 * (img.cols - 1)) * ps;
      double acc = 0.0;
      for (int v = 0; v < nv; ++v) {
        const double* qv = q.data() + static_cast<std::size_t>(v) * nb;
        const double cv = cs[static_cast<std::size_t>(v)], sv = sn[static_cast<std::size_t>(v)];
        if (fan) {
          const double vx = x - rs * sv, vy = y + rs * cv;
          // Fan angle of the ray through (x, y), measured like bin offsets.
          const double along = -vx * sv + vy * cv;
          const double across = vx * cv + vy * sv;
          const double gamma = std::atan2(across, along);
          acc += 0.5 * interp(qv, nb, gamma / tau + center) / (vx * vx + vy * vy);
        } else {
          acc += interp(qv, nb, (x * cv + y * sv) / tau + center);
        }
      }
      img(r, c) = acc * dtheta;
    }
  }
  return res;
}

}  // namespace superct
