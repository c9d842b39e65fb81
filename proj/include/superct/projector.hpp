#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include <Eigen/Core>

#include "superct/geometry.hpp"
#include "superct/image.hpp"

namespace superct {

struct RayHit {
  int pixel;
  double length;  // mm
};

/// Siddon traversal of one ray; hits are appended in order along the ray.
/// Rays missing the grid produce no hits.
void trace_ray(const Geometry& geom, int view, int bin, std::vector<RayHit>& hits);

Sinogram forward_project(const Image& image, const Geometry& geom);
Image back_project(const Sinogram& sino, const Geometry& geom);

/// Precomputed A stored row-compressed. Rays are ordered view-major, so ordered
/// subset m of M is every ray whose view index v satisfies v % M == m.
class SystemMatrix {
public:
  static SystemMatrix from_geometry(const Geometry& geom);
  /// Dense test systems; rows must be a multiple of n_views.
  static SystemMatrix from_dense(const Eigen::MatrixXd& a, int n_views);

  int rows() const { return n_rows_; }
  int cols() const { return n_cols_; }
  int n_views() const { return n_views_; }
  int n_bins() const { return n_bins_; }
  std::size_t nonzeros() const { return values_.size(); }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  Eigen::VectorXd back(const Eigen::VectorXd& y) const;

  /// Subset versions act on full-length ray vectors; rays outside the subset
  /// are left at zero (forward) or ignored (back).
  Eigen::VectorXd forward_subset(const Eigen::VectorXd& x, int m, int n_subsets) const;
  Eigen::VectorXd back_subset(const Eigen::VectorXd& y, int m, int n_subsets) const;

  /// Ray index range of view v.
  int ray_begin(int view) const { return view * n_bins_; }

  Eigen::MatrixXd to_dense() const;

private:
  struct Transposed {
    std::vector<std::size_t> ptr;
    std::vector<int> ray;
    std::vector<double> val;
  };
  const Transposed& transposed(int m, int n_subsets) const;

  int n_rows_ = 0;
  int n_cols_ = 0;
  int n_views_ = 0;
  int n_bins_ = 0;
  std::vector<std::size_t> ptr_;
  std::vector<int> idx_;
  std::vector<double> values_;

  struct Cache {
    std::mutex mutex;
    std::map<int, std::vector<std::unique_ptr<Transposed>>> parts;
  };
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

}  // namespace superct
