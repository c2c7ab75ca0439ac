#pragma once

// 8-bit PNG read/write. Reading drops alpha, expands palettes and gray to
// RGB, and strips 16-bit samples. Writing uses fixed settings and no time
// chunk, so identical images give identical bytes.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "geocloak/image.hpp"

namespace geocloak::png {

class PngError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Values are k/255.
Image read_image(const std::filesystem::path& path);
// Gray (or RGB, first channel) 8-bit; > 127 is foreground.
Mask read_mask(const std::filesystem::path& path);

// Rounds clamp(v, 0, 1)·255 to the nearest integer.
void write_image(const std::filesystem::path& path, const Image& image);
void write_mask(const std::filesystem::path& path, const Mask& mask);

std::uint8_t to_byte(double v);
// Interleaved RGB bytes, row-major.
std::vector<std::uint8_t> to_bytes(const Image& image);

}  // namespace geocloak::png
