#pragma once

// Non-differentiable preview splatter for reconstructions. Each point is an
// isotropic Gaussian footprint; composition is back-to-front over white.

#include <array>
#include <vector>

#include "geocloak/encoder.hpp"
#include "geocloak/geometry.hpp"
#include "geocloak/image.hpp"

namespace geocloak::render {

inline constexpr std::size_t kDefaultPreviewSize = 256;
// Zeroth-order real spherical harmonic.
inline constexpr double kShC0 = 0.28209479177387814;

// Pixel coordinates (column, row) of a projected point: (a + 0.5)·size and
// (0.5 − b)·size, so the box centre lands on the image centre.
std::array<double, 2> to_pixel(const std::array<double, 2>& projected, std::size_t size);

// Footprint standard deviation in pixels for a scale triple.
double footprint_sigma(const std::array<double, 3>& scale, std::size_t size);

// color = clamp(0.5 + C0·sh, 0, 1) per channel.
std::array<double, 3> sh_to_color(const std::array<double, 3>& sh);

// Throws std::invalid_argument when attrs.size() != cloud.size() or size == 0.
Image render_preview(const geometry::PointCloud3D& cloud, const std::vector<encoder::GaussianAttributes>& attrs,
                     const geometry::ViewDirection& view, std::size_t size = kDefaultPreviewSize);

// Footprint centres in pixel coordinates, in cloud order.
std::vector<std::array<double, 2>> splat_centers(const geometry::PointCloud3D& cloud,
                                                 const geometry::ViewDirection& view,
                                                 std::size_t size = kDefaultPreviewSize);

}  // namespace geocloak::render
