#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace geocloak {

// Planar RGB image, channel-major (C×H×W) so it maps directly onto encoder
// input tensors. Values are nominally in [0, 1].
class Image {
 public:
  static constexpr std::size_t kChannels = 3;

  Image() = default;
  Image(std::size_t height, std::size_t width, double fill = 0.0);
  Image(std::size_t height, std::size_t width, std::vector<double> planar);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& at(std::size_t channel, std::size_t y, std::size_t x) {
    return values_[(channel * height_ + y) * width_ + x];
  }
  double at(std::size_t channel, std::size_t y, std::size_t x) const {
    return values_[(channel * height_ + y) * width_ + x];
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

// Binary foreground mask over the image plane; 1 = pixel may be perturbed.
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t height, std::size_t width, std::uint8_t fill = 1);
  // Throws std::invalid_argument if any value is not 0 or 1.
  Mask(std::size_t height, std::size_t width, std::vector<std::uint8_t> values);

  static Mask left_half(std::size_t height, std::size_t width);
  static Mask checkerboard(std::size_t height, std::size_t width);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return values_[y * width_ + x]; }
  std::span<const std::uint8_t> values() const { return values_; }
  std::size_t count() const;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> values_;
};

std::string shape_string(std::size_t height, std::size_t width);

}  // namespace geocloak
