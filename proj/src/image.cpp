#include "geocloak/image.hpp"

#include <stdexcept>

namespace geocloak {

Image::Image(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), values_(kChannels * height * width, fill) {}

Image::Image(std::size_t height, std::size_t width, std::vector<double> planar)
    : height_(height), width_(width), values_(std::move(planar)) {
  if (values_.size() != kChannels * height * width) {
    throw std::invalid_argument("Image: expected " + std::to_string(kChannels * height * width) +
                                " values for " + shape_string(height, width) + ", got " +
                                std::to_string(values_.size()));
  }
}

Mask::Mask(std::size_t height, std::size_t width, std::uint8_t fill)
    : Mask(height, width, std::vector<std::uint8_t>(height * width, fill)) {}

Mask::Mask(std::size_t height, std::size_t width, std::vector<std::uint8_t> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (values_.size() != height * width) {
    throw std::invalid_argument("Mask: expected " + std::to_string(height * width) + " values, got " +
                                std::to_string(values_.size()));
  }
  for (auto v : values_) {
    if (v > 1) throw std::invalid_argument("Mask: values must be 0 or 1");
  }
}

Mask Mask::left_half(std::size_t height, std::size_t width) {
  std::vector<std::uint8_t> v(height * width, 0);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width / 2; ++x) v[y * width + x] = 1;
  }
  return Mask(height, width, std::move(v));
}

Mask Mask::checkerboard(std::size_t height, std::size_t width) {
  std::vector<std::uint8_t> v(height * width, 0);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) v[y * width + x] = (x + y) % 2 == 0 ? 1 : 0;
  }
  return Mask(height, width, std::move(v));
}

std::size_t Mask::count() const {
  std::size_t n = 0;
  for (auto v : values_) n += v;
  return n;
}

std::string shape_string(std::size_t height, std::size_t width) {
  return std::to_string(height) + "x" + std::to_string(width);
}

}  // namespace geocloak
