#include "geocloak/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

namespace geocloak::png {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open(const std::filesystem::path& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw PngError("cannot open '" + path.string() + "'");
  return f;
}

struct Raster {
  std::size_t height = 0, width = 0, channels = 0;
  std::vector<std::uint8_t> bytes;
};

// libpng reports errors through longjmp; the handlers below stash a message
// and the callers convert it to an exception outside the setjmp frame.
void on_error(png_structp png_ptr, png_const_charp msg) {
  auto* message = static_cast<std::string*>(png_get_error_ptr(png_ptr));
  if (message) *message = msg;
  png_longjmp(png_ptr, 1);
}
void on_warning(png_structp, png_const_charp) {}

Raster read_raster(const std::filesystem::path& path, bool rgb) {
  File file = open(path, "rb");
  std::uint8_t sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw PngError("'" + path.string() + "' is not a PNG file");
  }
  std::string message;
  png_structp png_ptr = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, on_error, on_warning);
  if (!png_ptr) throw PngError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png_ptr);
  if (!info) {
    png_destroy_read_struct(&png_ptr, nullptr, nullptr);
    throw PngError("png_create_info_struct failed");
  }
  Raster r;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png_ptr))) {
    png_destroy_read_struct(&png_ptr, &info, nullptr);
    throw PngError("'" + path.string() + "': " + message);
  }
  png_init_io(png_ptr, file.get());
  png_set_sig_bytes(png_ptr, 8);
  png_read_info(png_ptr, info);

  const auto color = png_get_color_type(png_ptr, info);
  const auto depth = png_get_bit_depth(png_ptr, info);
  if (depth == 16) png_set_strip_16(png_ptr);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png_ptr);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png_ptr);
  if (png_get_valid(png_ptr, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png_ptr);
  png_set_strip_alpha(png_ptr);
  if (rgb && (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)) png_set_gray_to_rgb(png_ptr);
  png_read_update_info(png_ptr, info);

  r.width = png_get_image_width(png_ptr, info);
  r.height = png_get_image_height(png_ptr, info);
  r.channels = png_get_channels(png_ptr, info);
  r.bytes.resize(r.height * r.width * r.channels);
  rows.resize(r.height);
  for (std::size_t y = 0; y < r.height; ++y) rows[y] = r.bytes.data() + y * r.width * r.channels;
  png_read_image(png_ptr, rows.data());
  png_read_end(png_ptr, nullptr);
  png_destroy_read_struct(&png_ptr, &info, nullptr);
  return r;
}

void write_raster(const std::filesystem::path& path, const Raster& r) {
  File file = open(path, "wb");
  std::string message;
  png_structp png_ptr = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, on_error, on_warning);
  if (!png_ptr) throw PngError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png_ptr);
  if (!info) {
    png_destroy_write_struct(&png_ptr, nullptr);
    throw PngError("png_create_info_struct failed");
  }
  std::vector<png_bytep> rows(r.height);
  if (setjmp(png_jmpbuf(png_ptr))) {
    png_destroy_write_struct(&png_ptr, &info);
    throw PngError("'" + path.string() + "': " + message);
  }
  png_init_io(png_ptr, file.get());
  png_set_compression_level(png_ptr, 9);
  png_set_filter(png_ptr, 0, PNG_FILTER_NONE);
  png_set_IHDR(png_ptr, info, static_cast<png_uint_32>(r.width), static_cast<png_uint_32>(r.height), 8,
               r.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png_ptr, info);
  for (std::size_t y = 0; y < r.height; ++y) {
    rows[y] = const_cast<png_bytep>(r.bytes.data() + y * r.width * r.channels);
  }
  png_write_image(png_ptr, rows.data());
  png_write_end(png_ptr, nullptr);
  png_destroy_write_struct(&png_ptr, &info);
  if (std::fflush(file.get()) != 0) throw PngError("write failed for '" + path.string() + "'");
}

}  // namespace

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::vector<std::uint8_t> to_bytes(const Image& image) {
  const std::size_t h = image.height(), w = image.width();
  std::vector<std::uint8_t> out(h * w * Image::kChannels);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        out[(y * w + x) * Image::kChannels + c] = to_byte(image.at(c, y, x));
      }
    }
  }
  return out;
}

Image read_image(const std::filesystem::path& path) {
  const Raster r = read_raster(path, true);
  Image img(r.height, r.width);
  for (std::size_t y = 0; y < r.height; ++y) {
    for (std::size_t x = 0; x < r.width; ++x) {
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        img.at(c, y, x) = r.bytes[(y * r.width + x) * r.channels + c] / 255.0;
      }
    }
  }
  return img;
}

Mask read_mask(const std::filesystem::path& path) {
  const Raster r = read_raster(path, false);
  std::vector<std::uint8_t> values(r.height * r.width);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = r.bytes[i * r.channels] > 127 ? 1 : 0;
  return Mask(r.height, r.width, std::move(values));
}

void write_image(const std::filesystem::path& path, const Image& image) {
  write_raster(path, {image.height(), image.width(), Image::kChannels, to_bytes(image)});
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
  Raster r{mask.height(), mask.width(), 1, {}};
  r.bytes.reserve(mask.values().size());
  for (auto v : mask.values()) r.bytes.push_back(v ? 255 : 0);
  write_raster(path, r);
}

}  // namespace geocloak::png
