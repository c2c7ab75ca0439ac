#include "geocloak/render.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace geocloak::render {

std::array<double, 2> to_pixel(const std::array<double, 2>& projected, std::size_t size) {
  const double s = static_cast<double>(size);
  return {(projected[0] + 0.5) * s, (0.5 - projected[1]) * s};
}

double footprint_sigma(const std::array<double, 3>& scale, std::size_t size) {
  const double mean = (scale[0] + scale[1] + scale[2]) / 3.0;
  const double sigma = 1.5 * mean * static_cast<double>(size) / 256.0;
  // Keep footprints visible but bounded whatever the decoder emits.
  return std::clamp(sigma, 0.5, static_cast<double>(size) / 16.0);
}

std::array<double, 3> sh_to_color(const std::array<double, 3>& sh) {
  std::array<double, 3> c{};
  for (std::size_t i = 0; i < 3; ++i) c[i] = std::clamp(0.5 + kShC0 * sh[i], 0.0, 1.0);
  return c;
}

std::vector<std::array<double, 2>> splat_centers(const geometry::PointCloud3D& cloud,
                                                 const geometry::ViewDirection& view, std::size_t size) {
  std::vector<std::array<double, 2>> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) out.push_back(to_pixel(view.project(p), size));
  return out;
}

Image render_preview(const geometry::PointCloud3D& cloud, const std::vector<encoder::GaussianAttributes>& attrs,
                     const geometry::ViewDirection& view, std::size_t size) {
  if (attrs.size() != cloud.size()) {
    throw std::invalid_argument("render_preview: " + std::to_string(attrs.size()) + " attribute rows for " +
                                std::to_string(cloud.size()) + " points");
  }
  if (size == 0) throw std::invalid_argument("render_preview: size must be positive");

  Image out(size, size, 1.0);
  std::vector<double> depth(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) depth[i] = view.depth(cloud[i]);
  std::vector<std::size_t> order(cloud.size());
  std::iota(order.begin(), order.end(), 0);
  // Farthest first; stable so equal depths keep index order.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return depth[a] < depth[b]; });

  const auto centers = splat_centers(cloud, view, size);
  const long n = static_cast<long>(size);
  for (std::size_t i : order) {
    const auto& a = attrs[i];
    if (a.opacity <= 0.0) continue;
    const double sigma = footprint_sigma(a.scale, size);
    const double radius = 3.0 * sigma;
    const auto color = sh_to_color(a.sh);
    const auto [cx, cy] = centers[i];
    const long x0 = std::max(0L, static_cast<long>(std::floor(cx - radius)));
    const long x1 = std::min(n - 1, static_cast<long>(std::ceil(cx + radius)));
    const long y0 = std::max(0L, static_cast<long>(std::floor(cy - radius)));
    const long y1 = std::min(n - 1, static_cast<long>(std::ceil(cy + radius)));
    for (long y = y0; y <= y1; ++y) {
      for (long x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const double d2 = dx * dx + dy * dy;
        if (d2 > radius * radius) continue;
        const double w = std::min(1.0, a.opacity) * std::exp(-d2 / (2.0 * sigma * sigma));
        for (std::size_t c = 0; c < Image::kChannels; ++c) {
          double& v = out.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
          v = w * color[c] + (1.0 - w) * v;
        }
      }
    }
  }
  return out;
}

}  // namespace geocloak::render
