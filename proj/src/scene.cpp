#include "geocloak/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace geocloak::scene {

namespace {

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

}  // namespace

Scene bundled_scene(std::size_t size) {
  Scene s{Image(size, size), Mask(size, size, 0)};
  std::vector<std::uint8_t> mask(size * size, 0);
  const double n = static_cast<double>(size);
  const std::array<double, 3> light{-0.4, 0.5, 0.768};  // roughly unit, upper left

  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double u = (x + 0.5) / n, v = (y + 0.5) / n;
      // Backdrop: pale vertical gradient.
      std::array<double, 3> rgb{0.92 - 0.1 * v, 0.93 - 0.08 * v, 0.95 - 0.05 * v};
      bool object = false;

      // Box: axis-aligned front face plus a darker top strip.
      if (u > 0.55 && u < 0.88 && v > 0.45 && v < 0.85) {
        const double shade = v < 0.52 ? 0.85 : 0.6 + 0.2 * (u - 0.55);
        rgb = {0.25 * shade, 0.45 * shade, 0.8 * shade};
        object = true;
      }

      // Sphere, drawn over the box.
      const double dx = (u - 0.38) / 0.26, dy = (v - 0.52) / 0.26;
      const double r2 = dx * dx + dy * dy;
      if (r2 < 1.0) {
        const double dz = std::sqrt(1.0 - r2);
        const double lambert = std::max(0.0, -dx * light[0] + -dy * -light[1] + dz * light[2]);
        const double shade = 0.2 + 0.8 * lambert;
        rgb = {0.9 * shade, 0.35 * shade, 0.2 * shade};
        object = true;
      }

      for (std::size_t c = 0; c < Image::kChannels; ++c) s.image.at(c, y, x) = quantize(rgb[c]);
      mask[y * size + x] = object ? 1 : 0;
    }
  }
  s.mask = Mask(size, size, std::move(mask));
  return s;
}

}  // namespace geocloak::scene
