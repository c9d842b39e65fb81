#include "superct/projector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "superct/error.hpp"

namespace superct {

namespace {

void check_dims(const Geometry& geom, int rows, int cols) {
  if (rows != geom.image_rows || cols != geom.image_cols) {
    throw DimensionError("image " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " does not match geometry " + std::to_string(geom.image_rows) + "x" +
                         std::to_string(geom.image_cols));
  }
}

void check_sino(const Geometry& geom, const Sinogram& sino) {
  if (sino.n_views != geom.n_views || sino.n_bins != geom.n_bins || sino.size() != geom.n_rays()) {
    throw DimensionError("sinogram shape does not match geometry");
  }
}

// Parameter interval [lo, hi] over which origin + a*dir lies in [b0, b1].
bool slab(double origin, double dir, double b0, double b1, double& lo, double& hi) {
  if (dir == 0.0) {
    if (origin < b0 || origin > b1) return false;
    lo = -std::numeric_limits<double>::infinity();
    hi = std::numeric_limits<double>::infinity();
    return true;
  }
  const double a0 = (b0 - origin) / dir;
  const double a1 = (b1 - origin) / dir;
  lo = std::min(a0, a1);
  hi = std::max(a0, a1);
  return true;
}

constexpr int kBackBlocks = 8;

}  // namespace

void trace_ray(const Geometry& geom, int view, int bin, std::vector<RayHit>& hits) {
  const Ray r = geom.ray(view, bin);
  const int nx = geom.image_cols, ny = geom.image_rows;
  const double ps = geom.pixel_size;
  const double x0 = -0.5 * nx * ps, x1 = 0.5 * nx * ps;
  const double y0 = -0.5 * ny * ps, y1 = 0.5 * ny * ps;

  double lx, hx, ly, hy;
  if (!slab(r.origin.x, r.direction.x, x0, x1, lx, hx)) return;
  if (!slab(r.origin.y, r.direction.y, y0, y1, ly, hy)) return;
  double a_min = std::max(lx, ly);
  const double a_max = std::min(hx, hy);
  if (geom.kind == GeometryKind::fan_arc) a_min = std::max(a_min, 0.0);
  if (!(a_max > a_min)) return;

  // Crossing parameters with the vertical and horizontal grid lines, merged.
  auto plane_range = [&](double o, double d, double b0, int n, double& a_first, double& a_step,
                         int& count) {
    count = 0;
    if (d == 0.0) return;
    const double p_enter = o + a_min * d;
    const double p_exit = o + a_max * d;
    int i_lo, i_hi;
    if (d > 0) {
      i_lo = static_cast<int>(std::ceil((p_enter - b0) / ps));
      i_hi = static_cast<int>(std::floor((p_exit - b0) / ps));
    } else {
      i_lo = static_cast<int>(std::ceil((p_exit - b0) / ps));
      i_hi = static_cast<int>(std::floor((p_enter - b0) / ps));
    }
    i_lo = std::max(i_lo, 0);
    i_hi = std::min(i_hi, n);
    if (i_hi < i_lo) return;
    count = i_hi - i_lo + 1;
    a_step = ps / std::abs(d);
    const int i_first = d > 0 ? i_lo : i_hi;
    a_first = (b0 + i_first * ps - o) / d;
  };

  double ax_first = 0, ax_step = 0, ay_first = 0, ay_step = 0;
  int nxc = 0, nyc = 0;
  plane_range(r.origin.x, r.direction.x, x0, nx, ax_first, ax_step, nxc);
  plane_range(r.origin.y, r.direction.y, y0, ny, ay_first, ay_step, nyc);

  double a_prev = a_min;
  int ix = 0, iy = 0;
  auto emit = [&](double a_next) {
    const double len = a_next - a_prev;
    if (len > 0.0) {
      const double am = 0.5 * (a_next + a_prev);
      const double px = r.origin.x + am * r.direction.x;
      const double py = r.origin.y + am * r.direction.y;
      const int c = static_cast<int>(std::floor((px - x0) / ps));
      const int row = static_cast<int>(std::floor((y1 - py) / ps));
      if (c >= 0 && c < nx && row >= 0 && row < ny) hits.push_back({row * nx + c, len});
      a_prev = a_next;
    }
  };
  while (ix < nxc || iy < nyc) {
    const double ax = ix < nxc ? ax_first + ix * ax_step : std::numeric_limits<double>::infinity();
    const double ay = iy < nyc ? ay_first + iy * ay_step : std::numeric_limits<double>::infinity();
    double a;
    if (ax <= ay) {
      a = ax;
      ++ix;
    } else {
      a = ay;
      ++iy;
    }
    if (a <= a_prev) continue;
    if (a >= a_max) break;
    emit(a);
  }
  emit(a_max);
}

Sinogram forward_project(const Image& image, const Geometry& geom) {
  check_dims(geom, image.rows, image.cols);
  if (!image.all_finite()) throw NumericalError("forward_project: non-finite image values");
  Sinogram out(geom.n_views, geom.n_bins, SinogramKind::line_integral);
  const int n_rays = static_cast<int>(geom.n_rays());
#pragma omp parallel
  {
    std::vector<RayHit> hits;
#pragma omp for schedule(static)
    for (int i = 0; i < n_rays; ++i) {
      hits.clear();
      trace_ray(geom, i / geom.n_bins, i % geom.n_bins, hits);
      double s = 0.0;
      for (const auto& h : hits) s += h.length * image.values[static_cast<std::size_t>(h.pixel)];
      out.values[static_cast<std::size_t>(i)] = s;
    }
  }
  return out;
}

Image back_project(const Sinogram& sino, const Geometry& geom) {
  check_sino(geom, sino);
  if (sino.kind != SinogramKind::line_integral) {
    throw DimensionError("back_project expects a line-integral sinogram");
  }
  const int n_blocks = std::min(kBackBlocks, geom.n_views);
  const std::size_t np = geom.n_pixels();
  std::vector<std::vector<double>> partial(static_cast<std::size_t>(n_blocks), std::vector<double>(np, 0.0));
#pragma omp parallel
  {
    std::vector<RayHit> hits;
#pragma omp for schedule(static, 1)
    for (int b = 0; b < n_blocks; ++b) {
      auto& acc = partial[static_cast<std::size_t>(b)];
      const int v0 = b * geom.n_views / n_blocks;
      const int v1 = (b + 1) * geom.n_views / n_blocks;
      for (int v = v0; v < v1; ++v) {
        for (int k = 0; k < geom.n_bins; ++k) {
          const double y = sino.at(v, k);
          if (y == 0.0) continue;
          hits.clear();
          trace_ray(geom, v, k, hits);
          for (const auto& h : hits) acc[static_cast<std::size_t>(h.pixel)] += h.length * y;
        }
      }
    }
  }
  Image out(geom.image_rows, geom.image_cols);
  for (const auto& acc : partial) {
    for (std::size_t j = 0; j < np; ++j) out.values[j] += acc[j];
  }
  return out;
}

SystemMatrix SystemMatrix::from_geometry(const Geometry& geom) {
  geom.validate();
  SystemMatrix a;
  a.n_views_ = geom.n_views;
  a.n_bins_ = geom.n_bins;
  a.n_rows_ = static_cast<int>(geom.n_rays());
  a.n_cols_ = static_cast<int>(geom.n_pixels());
  std::vector<std::vector<RayHit>> rows(static_cast<std::size_t>(a.n_rows_));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.n_rows_; ++i) trace_ray(geom, i / geom.n_bins, i % geom.n_bins, rows[static_cast<std::size_t>(i)]);
  a.ptr_.assign(static_cast<std::size_t>(a.n_rows_) + 1, 0);
  for (int i = 0; i < a.n_rows_; ++i) a.ptr_[static_cast<std::size_t>(i) + 1] = a.ptr_[static_cast<std::size_t>(i)] + rows[static_cast<std::size_t>(i)].size();
  a.idx_.resize(a.ptr_.back());
  a.values_.resize(a.ptr_.back());
  for (int i = 0; i < a.n_rows_; ++i) {
    std::size_t p = a.ptr_[static_cast<std::size_t>(i)];
    for (const auto& h : rows[static_cast<std::size_t>(i)]) {
      a.idx_[p] = h.pixel;
      a.values_[p] = h.length;
      ++p;
    }
  }
  return a;
}

SystemMatrix SystemMatrix::from_dense(const Eigen::MatrixXd& dense, int n_views) {
  if (n_views < 1 || dense.rows() % n_views != 0) {
    throw DimensionError("dense system rows must be a multiple of n_views");
  }
  SystemMatrix a;
  a.n_views_ = n_views;
  a.n_bins_ = static_cast<int>(dense.rows() / n_views);
  a.n_rows_ = static_cast<int>(dense.rows());
  a.n_cols_ = static_cast<int>(dense.cols());
  a.ptr_.push_back(0);
  for (int i = 0; i < a.n_rows_; ++i) {
    for (int j = 0; j < a.n_cols_; ++j) {
      if (dense(i, j) != 0.0) {
        a.idx_.push_back(j);
        a.values_.push_back(dense(i, j));
      }
    }
    a.ptr_.push_back(a.idx_.size());
  }
  return a;
}

Eigen::MatrixXd SystemMatrix::to_dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n_rows_, n_cols_);
  for (int i = 0; i < n_rows_; ++i) {
    for (std::size_t p = ptr_[static_cast<std::size_t>(i)]; p < ptr_[static_cast<std::size_t>(i) + 1]; ++p) d(i, idx_[p]) += values_[p];
  }
  return d;
}

Eigen::VectorXd SystemMatrix::forward(const Eigen::VectorXd& x) const { return forward_subset(x, 0, 1); }

Eigen::VectorXd SystemMatrix::back(const Eigen::VectorXd& y) const { return back_subset(y, 0, 1); }

Eigen::VectorXd SystemMatrix::forward_subset(const Eigen::VectorXd& x, int m, int n_subsets) const {
  if (x.size() != n_cols_) throw DimensionError("SystemMatrix::forward: image length mismatch");
  if (n_subsets < 1 || m < 0 || m >= n_subsets) throw ConfigError("invalid subset index");
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n_rows_);
  const int n_sub_views = (n_views_ - m + n_subsets - 1) / n_subsets;
  const int n_sub_rays = n_sub_views * n_bins_;
#pragma omp parallel for schedule(static)
  for (int t = 0; t < n_sub_rays; ++t) {
    const int i = (m + (t / n_bins_) * n_subsets) * n_bins_ + t % n_bins_;
    double s = 0.0;
    for (std::size_t p = ptr_[static_cast<std::size_t>(i)]; p < ptr_[static_cast<std::size_t>(i) + 1]; ++p) s += values_[p] * x[idx_[p]];
    y[i] = s;
  }
  return y;
}

const SystemMatrix::Transposed& SystemMatrix::transposed(int m, int n_subsets) const {
  std::lock_guard<std::mutex> lock(cache_->mutex);
  auto& parts = cache_->parts[n_subsets];
  if (parts.empty()) parts.resize(static_cast<std::size_t>(n_subsets));
  auto& slot = parts[static_cast<std::size_t>(m)];
  if (!slot) {
    auto t = std::make_unique<Transposed>();
    t->ptr.assign(static_cast<std::size_t>(n_cols_) + 1, 0);
    for (int v = m; v < n_views_; v += n_subsets) {
      for (int i = v * n_bins_; i < (v + 1) * n_bins_; ++i) {
        for (std::size_t p = ptr_[static_cast<std::size_t>(i)]; p < ptr_[static_cast<std::size_t>(i) + 1]; ++p) ++t->ptr[static_cast<std::size_t>(idx_[p]) + 1];
      }
    }
    for (int j = 0; j < n_cols_; ++j) t->ptr[static_cast<std::size_t>(j) + 1] += t->ptr[static_cast<std::size_t>(j)];
    t->ray.resize(t->ptr.back());
    t->val.resize(t->ptr.back());
    std::vector<std::size_t> fill(t->ptr.begin(), t->ptr.end() - 1);
    for (int v = m; v < n_views_; v += n_subsets) {
      for (int i = v * n_bins_; i < (v + 1) * n_bins_; ++i) {
        for (std::size_t p = ptr_[static_cast<std::size_t>(i)]; p < ptr_[static_cast<std::size_t>(i) + 1]; ++p) {
          const std::size_t q = fill[static_cast<std::size_t>(idx_[p])]++;
          t->ray[q] = i;
          t->val[q] = values_[p];
        }
      }
    }
    slot = std::move(t);
  }
  return *slot;
}

Eigen::VectorXd SystemMatrix::back_subset(const Eigen::VectorXd& y, int m, int n_subsets) const {
  if (y.size() != n_rows_) throw DimensionError("SystemMatrix::back: sinogram length mismatch");
  if (n_subsets < 1 || m < 0 || m >= n_subsets) throw ConfigError("invalid subset index");
  const Transposed& t = transposed(m, n_subsets);
  Eigen::VectorXd x(n_cols_);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < n_cols_; ++j) {
    double s = 0.0;
    for (std::size_t p = t.ptr[static_cast<std::size_t>(j)]; p < t.ptr[static_cast<std::size_t>(j) + 1]; ++p) s += t.val[p] * y[t.ray[p]];
    x[j] = s;
  }
  return x;
}

}  // namespace superct
