#pragma once

// Point clouds, view projection and Chamfer distance.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geocloak/ndiff.hpp"

namespace geocloak::geometry {

template <std::size_t D>
using PointCloud = std::vector<std::array<double, D>>;
using PointCloud2D = PointCloud<2>;
using PointCloud3D = PointCloud<3>;

enum class AxisPair { XY, XZ, YZ };

// Orthographic viewing direction. Axis pairs select two coordinates
// verbatim. Yaw mode places the camera on a right-handed orbit about +y
// (0° looks down -z, i.e. equals XY) and keeps the camera's (right, up)
// coordinates: (x·cosθ − z·sinθ, y).
class ViewDirection {
 public:
  static ViewDirection axes(AxisPair pair);
  static ViewDirection yaw(double degrees);
  // Accepts "xy", "xz", "yz", "angle:<degrees>" and the aliases
  // "front" (xy), "side" (yz), "top" (xz).
  static ViewDirection parse(std::string_view text);

  bool is_axis_pair() const { return axis_mode_; }
  AxisPair pair() const { return pair_; }
  double yaw_degrees() const { return yaw_degrees_; }
  std::string to_string() const;

  std::array<double, 2> project(const std::array<double, 3>& p) const;
  // Signed distance toward the camera; larger is nearer.
  double depth(const std::array<double, 3>& p) const;

 private:
  bool axis_mode_ = true;
  AxisPair pair_ = AxisPair::XY;
  double yaw_degrees_ = 0.0;
  double cos_ = 1.0, sin_ = 0.0;
};

PointCloud2D project(const PointCloud3D& cloud, const ViewDirection& view);
// Differentiable: cloud is N×3, result N×2.
ndiff::Tensor project(ndiff::Tape& tape, const ndiff::Tensor& cloud, const ViewDirection& view);

// Non-owning view of a row-major N×dim coordinate array.
struct CloudSpan {
  std::span<const double> coords;
  std::size_t dim = 0;

  std::size_t size() const { return dim == 0 ? 0 : coords.size() / dim; }
  const double* point(std::size_t i) const { return coords.data() + i * dim; }
};

template <std::size_t D>
CloudSpan view_of(const PointCloud<D>& cloud) {
  return {std::span<const double>(cloud.empty() ? nullptr : cloud.front().data(), cloud.size() * D), D};
}

double squared_distance(const double* a, const double* b, std::size_t dim);

// Bucketed point index over a uniform grid spanning the points' bounding
// box. Queries search rings of cells outward from the query's cell and stop
// once no unvisited cell can hold a closer point.
class UniformGrid {
 public:
  explicit UniformGrid(CloudSpan points);

  // Index of the nearest indexed point; ties go to the lowest index.
  std::size_t nearest(const double* query) const;

 private:
  std::size_t cell_of_axis(double coord, std::size_t axis) const;
  void scan_cell(std::size_t flat, const double* query, double& best, std::size_t& best_index) const;

  CloudSpan points_;
  std::array<double, 3> lo_{};
  std::array<double, 3> cell_size_{};
  std::array<std::size_t, 3> cells_{1, 1, 1};
  std::vector<std::size_t> cell_start_;
  std::vector<std::size_t> order_;
};

enum class ChamferMethod { BruteForce, Grid };

struct ChamferMatch {
  double value = 0.0;
  double a_to_b = 0.0;  // mean over a of squared distance to nearest b
  double b_to_a = 0.0;
  std::vector<std::size_t> nearest_in_b;  // per point of a
  std::vector<std::size_t> nearest_in_a;  // per point of b
};

// CD(a,b) = mean_a min_b |p−q|² + mean_b min_a |p−q|². Throws
// std::invalid_argument on empty clouds or mismatched dimensionality.
ChamferMatch chamfer_match(CloudSpan a, CloudSpan b, ChamferMethod method);

template <std::size_t D>
double chamfer(const PointCloud<D>& a, const PointCloud<D>& b) {
  return chamfer_match(view_of(a), view_of(b), ChamferMethod::BruteForce).value;
}

template <std::size_t D>
double chamfer_accelerated(const PointCloud<D>& a, const PointCloud<D>& b) {
  return chamfer_match(view_of(a), view_of(b), ChamferMethod::Grid).value;
}

// Differentiable Chamfer on N×D tensors; nearest-neighbour assignment is
// held fixed during backward.
ndiff::Tensor chamfer(ndiff::Tape& tape, const ndiff::Tensor& a, const ndiff::Tensor& b,
                      ChamferMethod method = ChamferMethod::Grid);

template <std::size_t D>
ndiff::Tensor to_tensor(const PointCloud<D>& cloud) {
  std::vector<double> flat;
  flat.reserve(cloud.size() * D);
  for (const auto& p : cloud) flat.insert(flat.end(), p.begin(), p.end());
  return ndiff::Tensor::from({cloud.size(), D}, std::move(flat));
}

template <std::size_t D>
PointCloud<D> from_tensor(const ndiff::Tensor& t) {
  if (t.rank() != 2 || t.dim(1) != D) {
    throw ndiff::ShapeError("expected N×" + std::to_string(D) + " tensor, got " +
                            ndiff::to_string(t.shape()));
  }
  PointCloud<D> cloud(t.dim(0));
  auto v = t.data();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (std::size_t d = 0; d < D; ++d) cloud[i][d] = v[i * D + d];
  }
  return cloud;
}

}  // namespace geocloak::geometry
