#include "geocloak/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace geocloak::geometry {

// --- views -----------------------------------------------------------------

ViewDirection ViewDirection::axes(AxisPair pair) {
  ViewDirection v;
  v.axis_mode_ = true;
  v.pair_ = pair;
  return v;
}

ViewDirection ViewDirection::yaw(double degrees) {
  if (!std::isfinite(degrees)) throw std::invalid_argument("view angle must be finite");
  ViewDirection v;
  v.axis_mode_ = false;
  v.yaw_degrees_ = degrees;
  const double radians = degrees * std::numbers::pi / 180.0;
  v.cos_ = std::cos(radians);
  v.sin_ = std::sin(radians);
  return v;
}

ViewDirection ViewDirection::parse(std::string_view text) {
  if (text == "xy" || text == "front") return axes(AxisPair::XY);
  if (text == "xz" || text == "top") return axes(AxisPair::XZ);
  if (text == "yz" || text == "side") return axes(AxisPair::YZ);
  constexpr std::string_view prefix = "angle:";
  if (text.starts_with(prefix)) {
    auto number = text.substr(prefix.size());
    double degrees = 0.0;
    auto [end, ec] = std::from_chars(number.data(), number.data() + number.size(), degrees);
    if (ec == std::errc() && end == number.data() + number.size() && !number.empty()) {
      return yaw(degrees);
    }
  }
  throw std::invalid_argument("unknown view '" + std::string(text) +
                              "' (expected xy, xz, yz, front, side, top or angle:<degrees>)");
}

std::string ViewDirection::to_string() const {
  if (!axis_mode_) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, yaw_degrees_);
    (void)ec;
    return "angle:" + std::string(buf, end);
  }
  switch (pair_) {
    case AxisPair::XY: return "xy";
    case AxisPair::XZ: return "xz";
    case AxisPair::YZ: return "yz";
  }
  return "xy";
}

std::array<double, 2> ViewDirection::project(const std::array<double, 3>& p) const {
  if (!axis_mode_) return {p[0] * cos_ - p[2] * sin_, p[1]};
  switch (pair_) {
    case AxisPair::XY: return {p[0], p[1]};
    case AxisPair::XZ: return {p[0], p[2]};
    case AxisPair::YZ: return {p[1], p[2]};
  }
  return {p[0], p[1]};
}

double ViewDirection::depth(const std::array<double, 3>& p) const {
  // Camera frames are right-handed: toward-camera = right × up.
  if (!axis_mode_) return p[0] * sin_ + p[2] * cos_;
  switch (pair_) {
    case AxisPair::XY: return p[2];
    case AxisPair::XZ: return -p[1];
    case AxisPair::YZ: return p[0];
  }
  return p[2];
}

PointCloud2D project(const PointCloud3D& cloud, const ViewDirection& view) {
  PointCloud2D out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) out.push_back(view.project(p));
  return out;
}

ndiff::Tensor project(ndiff::Tape& tape, const ndiff::Tensor& cloud, const ViewDirection& view) {
  if (cloud.rank() != 2 || cloud.dim(1) != 3) {
    throw ndiff::ShapeError("project: expected N×3 cloud, got " + ndiff::to_string(cloud.shape()));
  }
  const std::size_t n = cloud.dim(0);
  auto in = cloud.data();
  std::vector<double> out(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    const auto q = view.project({in[3 * i], in[3 * i + 1], in[3 * i + 2]});
    out[2 * i] = q[0];
    out[2 * i + 1] = q[1];
  }
  auto result = ndiff::Tensor::from({n, 2}, std::move(out));
  return tape.record(
      {cloud}, result,
      [cloud, result, view, n]() {
        auto g = result.grad();
        auto gc = cloud.grad_mut();
        // Transpose of the linear map applied by ViewDirection::project.
        std::array<std::array<double, 3>, 2> rows{};
        for (std::size_t axis = 0; axis < 3; ++axis) {
          std::array<double, 3> e{};
          e[axis] = 1.0;
          const auto col = view.project(e);
          rows[0][axis] = col[0];
          rows[1][axis] = col[1];
        }
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t axis = 0; axis < 3; ++axis) {
            gc[3 * i + axis] += rows[0][axis] * g[2 * i] + rows[1][axis] * g[2 * i + 1];
          }
        }
      },
      "project");
}

// --- nearest neighbours ----------------------------------------------------

double squared_distance(const double* a, const double* b, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = a[d] - b[d];
    acc += diff * diff;
  }
  return acc;
}

UniformGrid::UniformGrid(CloudSpan points) : points_(points) {
  if (points.dim < 1 || points.dim > 3) throw std::invalid_argument("UniformGrid: dim must be 1..3");
  const std::size_t n = points.size();
  if (n == 0) throw std::invalid_argument("UniformGrid: empty point set");

  std::array<double, 3> hi{};
  for (std::size_t d = 0; d < points.dim; ++d) {
    lo_[d] = std::numeric_limits<double>::infinity();
    hi[d] = -std::numeric_limits<double>::infinity();
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < points.dim; ++d) {
      lo_[d] = std::min(lo_[d], points.point(i)[d]);
      hi[d] = std::max(hi[d], points.point(i)[d]);
    }
  }

  std::size_t active = 0;
  for (std::size_t d = 0; d < points.dim; ++d) active += hi[d] > lo_[d] ? 1 : 0;
  std::size_t per_axis = 1;
  if (active > 0) {
    const double target_cells = std::max(1.0, static_cast<double>(n) / 2.0);
    per_axis = static_cast<std::size_t>(
        std::max(1.0, std::floor(std::pow(target_cells, 1.0 / static_cast<double>(active)))));
  }
  for (std::size_t d = 0; d < points.dim; ++d) {
    if (hi[d] > lo_[d]) {
      cells_[d] = per_axis;
      cell_size_[d] = (hi[d] - lo_[d]) / static_cast<double>(per_axis);
    }
  }

  const std::size_t total = cells_[0] * cells_[1] * cells_[2];
  std::vector<std::size_t> flat(n);
  cell_start_.assign(total + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t f = 0;
    for (std::size_t d = points.dim; d-- > 0;) f = f * cells_[d] + cell_of_axis(points.point(i)[d], d);
    flat[i] = f;
    ++cell_start_[f + 1];
  }
  for (std::size_t c = 0; c < total; ++c) cell_start_[c + 1] += cell_start_[c];
  order_.resize(n);
  std::vector<std::size_t> cursor(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < n; ++i) order_[cursor[flat[i]]++] = i;
}

std::size_t UniformGrid::cell_of_axis(double coord, std::size_t axis) const {
  if (cells_[axis] == 1) return 0;
  const double t = std::floor((coord - lo_[axis]) / cell_size_[axis]);
  if (!(t > 0.0)) return 0;
  const auto last = static_cast<double>(cells_[axis] - 1);
  return static_cast<std::size_t>(std::min(t, last));
}

void UniformGrid::scan_cell(std::size_t flat, const double* query, double& best,
                            std::size_t& best_index) const {
  for (std::size_t k = cell_start_[flat]; k < cell_start_[flat + 1]; ++k) {
    const std::size_t idx = order_[k];
    const double d = squared_distance(query, points_.point(idx), points_.dim);
    if (d < best || (d == best && idx < best_index)) {
      best = d;
      best_index = idx;
    }
  }
}

std::size_t UniformGrid::nearest(const double* query) const {
  const std::size_t dim = points_.dim;
  std::array<std::ptrdiff_t, 3> center{0, 0, 0};
  for (std::size_t d = 0; d < dim; ++d) center[d] = static_cast<std::ptrdiff_t>(cell_of_axis(query[d], d));

  double max_cell = 0.0;
  for (std::size_t d = 0; d < dim; ++d) max_cell = std::max(max_cell, cell_size_[d]);
  // Absorbs rounding in the cell assignment of boundary points.
  const double margin = 1e-9 * max_cell + 1e-12;

  double best = std::numeric_limits<double>::infinity();
  std::size_t best_index = std::numeric_limits<std::size_t>::max();

  for (std::ptrdiff_t r = 0;; ++r) {
    std::array<std::ptrdiff_t, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (std::size_t d = 0; d < 3; ++d) {
      const auto last = static_cast<std::ptrdiff_t>(cells_[d]) - 1;
      lo[d] = std::max<std::ptrdiff_t>(0, center[d] - r);
      hi[d] = std::min<std::ptrdiff_t>(last, center[d] + r);
    }
    for (std::ptrdiff_t z = lo[2]; z <= hi[2]; ++z) {
      for (std::ptrdiff_t y = lo[1]; y <= hi[1]; ++y) {
        for (std::ptrdiff_t x = lo[0]; x <= hi[0]; ++x) {
          const std::ptrdiff_t ring = std::max({std::abs(x - center[0]), std::abs(y - center[1]),
                                                std::abs(z - center[2])});
          if (ring != r) continue;
          const auto flat = static_cast<std::size_t>(
              (z * static_cast<std::ptrdiff_t>(cells_[1]) + y) * static_cast<std::ptrdiff_t>(cells_[0]) + x);
          scan_cell(flat, query, best, best_index);
        }
      }
    }

    bool covered = true;
    double bound = std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < dim; ++d) {
      const std::ptrdiff_t lo_idx = center[d] - r, hi_idx = center[d] + r;
      if (lo_idx > 0) {
        covered = false;
        bound = std::min(bound, query[d] - (lo_[d] + static_cast<double>(lo_idx) * cell_size_[d]));
      }
      if (hi_idx < static_cast<std::ptrdiff_t>(cells_[d]) - 1) {
        covered = false;
        bound = std::min(bound, (lo_[d] + static_cast<double>(hi_idx + 1) * cell_size_[d]) - query[d]);
      }
    }
    if (covered) break;
    const double safe = bound - margin;
    if (safe > 0.0 && safe * safe > best) break;
  }
  return best_index;
}

// --- chamfer ---------------------------------------------------------------

namespace {

void validate_pair(CloudSpan a, CloudSpan b) {
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("chamfer: empty point cloud");
  if (a.dim != b.dim) {
    throw std::invalid_argument("chamfer: dimension mismatch (" + std::to_string(a.dim) + "D vs " +
                                std::to_string(b.dim) + "D)");
  }
}

std::vector<std::size_t> nearest_all(CloudSpan queries, CloudSpan targets, ChamferMethod method) {
  std::vector<std::size_t> out(queries.size());
  if (method == ChamferMethod::Grid) {
    UniformGrid grid(targets);
    for (std::size_t i = 0; i < queries.size(); ++i) out[i] = grid.nearest(queries.point(i));
    return out;
  }
  for (std::size_t i = 0; i < queries.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    for (std::size_t j = 0; j < targets.size(); ++j) {
      const double d = squared_distance(queries.point(i), targets.point(j), queries.dim);
      if (d < best) {
        best = d;
        best_index = j;
      }
    }
    out[i] = best_index;
  }
  return out;
}

double mean_nearest(CloudSpan queries, CloudSpan targets, const std::vector<std::size_t>& nn) {
  double total = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    total += squared_distance(queries.point(i), targets.point(nn[i]), queries.dim);
  }
  return total / static_cast<double>(queries.size());
}

}  // namespace

ChamferMatch chamfer_match(CloudSpan a, CloudSpan b, ChamferMethod method) {
  validate_pair(a, b);
  ChamferMatch m;
  m.nearest_in_b = nearest_all(a, b, method);
  m.nearest_in_a = nearest_all(b, a, method);
  m.a_to_b = mean_nearest(a, b, m.nearest_in_b);
  m.b_to_a = mean_nearest(b, a, m.nearest_in_a);
  m.value = m.a_to_b + m.b_to_a;
  return m;
}

ndiff::Tensor chamfer(ndiff::Tape& tape, const ndiff::Tensor& a, const ndiff::Tensor& b,
                      ChamferMethod method) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ndiff::ShapeError("chamfer: expected N×D clouds, got " + ndiff::to_string(a.shape()) +
                            " and " + ndiff::to_string(b.shape()));
  }
  const CloudSpan sa{a.data(), a.dim(1)}, sb{b.data(), b.dim(1)};
  auto match = std::make_shared<ChamferMatch>(chamfer_match(sa, sb, method));
  auto result = ndiff::Tensor::scalar(match->value);
  return tape.record(
      {a, b}, result,
      [a, b, result, match]() {
        const double g = result.grad()[0];
        const std::size_t dim = a.dim(1), na = a.dim(0), nb = b.dim(0);
        auto pa = a.data(), pb = b.data();
        std::span<double> ga, gb;
        if (a.requires_grad()) ga = a.grad_mut();
        if (b.requires_grad()) gb = b.grad_mut();
        const double wa = 2.0 * g / static_cast<double>(na);
        const double wb = 2.0 * g / static_cast<double>(nb);
        for (std::size_t i = 0; i < na; ++i) {
          const std::size_t j = match->nearest_in_b[i];
          for (std::size_t d = 0; d < dim; ++d) {
            const double diff = pa[i * dim + d] - pb[j * dim + d];
            if (!ga.empty()) ga[i * dim + d] += wa * diff;
            if (!gb.empty()) gb[j * dim + d] -= wa * diff;
          }
        }
        for (std::size_t j = 0; j < nb; ++j) {
          const std::size_t i = match->nearest_in_a[j];
          for (std::size_t d = 0; d < dim; ++d) {
            const double diff = pb[j * dim + d] - pa[i * dim + d];
            if (!gb.empty()) gb[j * dim + d] += wb * diff;
            if (!ga.empty()) ga[i * dim + d] -= wb * diff;
          }
        }
      },
      "chamfer");
}

}  // namespace geocloak::geometry
