#include "superct/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "superct/error.hpp"
#include "superct/io.hpp"

namespace superct {

namespace {

constexpr char kNetMagic[9] = "SUPERCTD";

struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;
  Tensor() = default;
  Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, 0.0) {}
  double* ch(int k) { return v.data() + static_cast<std::size_t>(k) * h * w; }
  const double* ch(int k) const { return v.data() + static_cast<std::size_t>(k) * h * w; }
};

// o += k (*) one zero-padded input channel of H x W, row pitch W + 2.
__attribute__((target_clones("arch=haswell", "default"))) void conv_accumulate(const double* base, const double* k, int H,
                                                                                  int W, double* o) {
  const int P = W + 2;
  const double k0 = k[0], k1 = k[1], k2 = k[2], k3 = k[3], k4 = k[4], k5 = k[5], k6 = k[6], k7 = k[7], k8 = k[8];
  for (int y = 0; y < H; ++y) {
    const double* __restrict r0 = base + static_cast<std::size_t>(y) * P;
    const double* __restrict r1 = r0 + P;
    const double* __restrict r2 = r1 + P;
    double* __restrict orow = o + static_cast<std::size_t>(y) * W;
    for (int x = 0; x < W; ++x) {
      orow[x] += k0 * r0[x] + k1 * r0[x + 1] + k2 * r0[x + 2] + k3 * r1[x] + k4 * r1[x + 1] + k5 * r1[x + 2] + k6 * r2[x] +
                 k7 * r2[x + 1] + k8 * r2[x + 2];
    }
  }
}

// out[co] = b[co] + sum_ci W[co][ci] (*) in[ci], 3x3, zero padding.
void conv_forward(const Tensor& in, const double* wgt, const double* bias, int cout, Tensor& out) {
  out = Tensor(cout, in.h, in.w);
  const int H = in.h, W = in.w, cin = in.c, P = W + 2;
  std::vector<double> pad(static_cast<std::size_t>(cin) * (H + 2) * P, 0.0);
  for (int ci = 0; ci < cin; ++ci) {
    for (int y = 0; y < H; ++y) {
      const double* src = in.ch(ci) + static_cast<std::size_t>(y) * W;
      std::copy(src, src + W, pad.begin() + (static_cast<std::ptrdiff_t>(ci) * (H + 2) + y + 1) * P + 1);
    }
  }
#pragma omp parallel for schedule(static) if (static_cast<long>(cout) * cin * H * W > 65536)
  for (int co = 0; co < cout; ++co) {
    double* o = out.ch(co);
    std::fill(o, o + static_cast<std::size_t>(H) * W, bias[co]);
    for (int ci = 0; ci < cin; ++ci)
      conv_accumulate(pad.data() + static_cast<std::size_t>(ci) * (H + 2) * P, wgt + (static_cast<std::size_t>(co) * cin + ci) * 9,
                      H, W, o);
  }
}

// Given dOut, accumulate dW, db and produce dIn.
void conv_backward(const Tensor& in, const double* wgt, const Tensor& dout, double* dw, double* db, Tensor* din) {
  const int H = in.h, W = in.w, cin = in.c, cout = dout.c;
#pragma omp parallel for schedule(static)
  for (int co = 0; co < cout; ++co) {
    const double* g = dout.ch(co);
    double s = 0.0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(H) * W; ++i) s += g[i];
    db[co] += s;
    for (int ci = 0; ci < cin; ++ci) {
      const double* x = in.ch(ci);
      double* k = dw + (static_cast<std::size_t>(co) * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const int dy = ky - 1, dx = kx - 1;
          const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
          const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
          double acc = 0.0;
          for (int y = y0; y < y1; ++y) {
            const double* grow = g + static_cast<std::size_t>(y) * W;
            const double* irow = x + static_cast<std::size_t>(y + dy) * W + dx;
            for (int xx = x0; xx < x1; ++xx) acc += grow[xx] * irow[xx];
          }
          k[ky * 3 + kx] += acc;
        }
      }
    }
  }
  if (!din) return;
  *din = Tensor(cin, H, W);
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < cin; ++ci) {
    double* d = din->ch(ci);
    for (int co = 0; co < cout; ++co) {
      const double* g = dout.ch(co);
      const double* k = wgt + (static_cast<std::size_t>(co) * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double kv = k[ky * 3 + kx];
          const int dy = ky - 1, dx = kx - 1;
          // in[y+dy][x+dx] contributed to out[y][x].
          const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
          const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
          for (int y = y0; y < y1; ++y) {
            const double* grow = g + static_cast<std::size_t>(y) * W;
            double* drow = d + static_cast<std::size_t>(y + dy) * W + dx;
            for (int xx = x0; xx < x1; ++xx) drow[xx] += kv * grow[xx];
          }
        }
      }
    }
  }
}

Tensor to_tensor(const Image& x) {
  Tensor t(1, x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) t.v[i] = x.values[i] / x.mu_water;
  return t;
}

Image crop(const Image& img, int r0, int c0, int side_r, int side_c) {
  Image out(side_r, side_c, img.mu_water);
  for (int r = 0; r < side_r; ++r)
    for (int c = 0; c < side_c; ++c) out(r, c) = img(r0 + r, c0 + c);
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!(lr_start > 0.0 && lr_end > 0.0)) throw ConfigError("train: learning rates must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must lie in [0, 1)");
  if (!(init_std >= 0.0)) throw ConfigError("train: init_std must be >= 0");
  if (crop < 3) throw ConfigError("train: crop must be >= 3");
  if (crops_per_pair < 1) throw ConfigError("train: crops_per_pair must be >= 1");
}

ConvDenoiser::ConvDenoiser() {
  std::size_t at = 0;
  for (int l = 0; l < kLayers; ++l) {
    offsets_.push_back(at);
    at += static_cast<std::size_t>(kWidths[static_cast<std::size_t>(l) + 1]) * kWidths[static_cast<std::size_t>(l)] * 9 +
          static_cast<std::size_t>(kWidths[static_cast<std::size_t>(l) + 1]);
  }
  offsets_.push_back(at);
  params_.assign(at, 0.0);
}

std::size_t ConvDenoiser::bias_offset(int layer) const {
  const auto l = static_cast<std::size_t>(layer);
  return offsets_[l] + static_cast<std::size_t>(kWidths[l + 1]) * kWidths[l] * 9;
}

void ConvDenoiser::zero() { std::fill(params_.begin(), params_.end(), 0.0); }

void ConvDenoiser::init_random(std::uint64_t seed, double stddev) {
  zero();
  if (stddev == 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, stddev);
  for (int l = 0; l < kLayers; ++l) {
    for (std::size_t i = weight_offset(l); i < bias_offset(l); ++i) params_[i] = n(rng);
  }
}

void ConvDenoiser::round_to_float() {
  for (auto& p : params_) p = static_cast<double>(static_cast<float>(p));
}

Image ConvDenoiser::apply(const Image& x) const {
  Tensor a = to_tensor(x);
  for (int l = 0; l < kLayers; ++l) {
    Tensor z;
    conv_forward(a, params_.data() + weight_offset(l), params_.data() + bias_offset(l), kWidths[static_cast<std::size_t>(l) + 1], z);
    if (relu && l + 1 < kLayers) {
      for (auto& v : z.v) v = std::max(v, 0.0);
    }
    a = std::move(z);
  }
  Image out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += x.mu_water * a.v[i];
  return out;
}

double ConvDenoiser::loss(const Image& x, const Image& ref) const {
  if (!x.same_shape(ref)) throw DimensionError("denoiser: input and reference differ in shape");
  const Image y = apply(x);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = (y.values[i] - ref.values[i]) / x.mu_water;
    s += d * d;
  }
  return s / static_cast<double>(y.size());
}

double ConvDenoiser::loss_and_gradient(const Image& x, const Image& ref, std::vector<double>& grad) const {
  if (!x.same_shape(ref)) throw DimensionError("denoiser: input and reference differ in shape");
  std::vector<Tensor> acts(kLayers + 1);  // inputs of each layer, then the net output
  std::vector<Tensor> pre(kLayers);
  acts[0] = to_tensor(x);
  for (int l = 0; l < kLayers; ++l) {
    conv_forward(acts[static_cast<std::size_t>(l)], params_.data() + weight_offset(l), params_.data() + bias_offset(l),
                 kWidths[static_cast<std::size_t>(l) + 1], pre[static_cast<std::size_t>(l)]);
    Tensor a = pre[static_cast<std::size_t>(l)];
    if (relu && l + 1 < kLayers) {
      for (auto& v : a.v) v = std::max(v, 0.0);
    }
    acts[static_cast<std::size_t>(l) + 1] = std::move(a);
  }
  const double n = static_cast<double>(x.size());
  Tensor d(1, x.rows, x.cols);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = acts[0].v[i] + acts[kLayers].v[i] - ref.values[i] / x.mu_water;
    s += r * r;
    d.v[i] = 2.0 * r / n;
  }
  grad.assign(params_.size(), 0.0);
  for (int l = kLayers - 1; l >= 0; --l) {
    if (relu && l + 1 < kLayers) {
      const auto& z = pre[static_cast<std::size_t>(l)];
      for (std::size_t i = 0; i < d.v.size(); ++i) {
        if (!(z.v[i] > 0.0)) d.v[i] = 0.0;
      }
    }
    Tensor din;
    conv_backward(acts[static_cast<std::size_t>(l)], params_.data() + weight_offset(l), d, grad.data() + weight_offset(l),
                  grad.data() + bias_offset(l), l > 0 ? &din : nullptr);
    d = std::move(din);
  }
  return s / n;
}

void ConvDenoiser::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path.string() + "' for writing");
  put_magic(os, kNetMagic);
  put_u32(os, kFormatVersion);
  put_u32(os, kLayers);
  for (int w : kWidths) put_u32(os, static_cast<std::uint32_t>(w));
  put_u32(os, relu ? 1u : 0u);
  put_u32(os, static_cast<std::uint32_t>(params_.size()));
  for (double p : params_) put_f32(os, static_cast<float>(p));
}

ConvDenoiser ConvDenoiser::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path.string() + "'");
  expect_magic(is, kNetMagic, path);
  if (get_u32(is) != kFormatVersion) throw FormatError("'" + path.string() + "': unsupported version");
  if (get_u32(is) != static_cast<std::uint32_t>(kLayers)) throw FormatError("'" + path.string() + "': layer count mismatch");
  for (int w : kWidths) {
    if (get_u32(is) != static_cast<std::uint32_t>(w)) throw FormatError("'" + path.string() + "': channel widths mismatch");
  }
  ConvDenoiser net;
  net.relu = get_u32(is) != 0;
  if (get_u32(is) != net.params_.size()) throw FormatError("'" + path.string() + "': parameter count mismatch");
  for (auto& p : net.params_) p = get_f32(is);
  if (!is) throw FormatError("'" + path.string() + "': truncated");
  return net;
}

TrainResult denoiser_train(ConvDenoiser& net, const std::vector<std::pair<Image, Image>>& pairs, const TrainConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw ConfigError("train: need at least one pair");
  for (const auto& [in, ref] : pairs) {
    if (!in.same_shape(ref)) throw DimensionError("train: pair shapes differ");
  }
  auto mean_loss = [&]() {
    double s = 0.0;
    for (const auto& [in, ref] : pairs) s += net.loss(in, ref);
    return s / static_cast<double>(pairs.size());
  };

  TrainResult res;
  res.loss.push_back(mean_loss());
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<double> velocity(net.params().size(), 0.0), grad;
  std::vector<int> order(pairs.size() * static_cast<std::size_t>(cfg.crops_per_pair));
  for (int e = 0; e < cfg.epochs; ++e) {
    const double frac = cfg.epochs > 1 ? static_cast<double>(e) / (cfg.epochs - 1) : 0.0;
    const double lr = cfg.lr_start * std::pow(cfg.lr_end / cfg.lr_start, frac);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
    for (int step : order) {
      const auto& [in, ref] = pairs[static_cast<std::size_t>(step) / static_cast<std::size_t>(cfg.crops_per_pair)];
      const int cr = std::min(cfg.crop, in.rows), cc = std::min(cfg.crop, in.cols);
      const int r0 = static_cast<int>(rng() % static_cast<std::uint64_t>(in.rows - cr + 1));
      const int c0 = static_cast<int>(rng() % static_cast<std::uint64_t>(in.cols - cc + 1));
      const double l = net.loss_and_gradient(crop(in, r0, c0, cr, cc), crop(ref, r0, c0, cr, cc), grad);
      if (!std::isfinite(l)) {
        throw NumericalError("train: non-finite loss at epoch " + std::to_string(e) + " (lr " + std::to_string(lr) + ")");
      }
      auto& p = net.params();
      for (std::size_t i = 0; i < p.size(); ++i) {
        velocity[i] = cfg.momentum * velocity[i] - lr * grad[i];
        p[i] += velocity[i];
      }
    }
    res.loss.push_back(mean_loss());
    if (!std::isfinite(res.loss.back())) throw NumericalError("train: non-finite loss after epoch " + std::to_string(e));
  }
  net.round_to_float();
  return res;
}

}  // namespace superct
