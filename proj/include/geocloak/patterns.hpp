#pragma once

// Target geometry patterns: 2D watermark clouds sampled from glyph rasters,
// and 3D clouds loaded from XYZ files.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "geocloak/geometry.hpp"

namespace geocloak::patterns {

inline constexpr std::size_t kFontColumns = 5;
inline constexpr std::size_t kFontRows = 7;
inline constexpr std::size_t kRasterSize = 64;
// Each font cell is a kCellPixels square block; the 45×63 glyph sits at
// (kRasterOffsetX, kRasterOffsetY) inside the 64×64 raster.
inline constexpr std::size_t kCellPixels = 9;
inline constexpr std::size_t kRasterOffsetX = 10;
inline constexpr std::size_t kRasterOffsetY = 0;

std::string_view supported_characters();
bool is_supported(char c);

struct GlyphRaster {
  char character = 0;
  std::vector<double> pixels;  // kRasterSize², row-major, 0 or 1

  double at(std::size_t row, std::size_t col) const { return pixels[row * kRasterSize + col]; }
};

// Throws std::invalid_argument listing the supported set.
GlyphRaster rasterize_glyph(char c);

enum class PatternKind { Predefined, Customized };

struct Pattern {
  PatternKind kind = PatternKind::Predefined;
  std::variant<geometry::PointCloud2D, geometry::PointCloud3D> points;
  std::string source;  // character or file path
  std::uint64_t seed = 0;

  std::size_t dims() const { return points.index() == 0 ? 2 : 3; }
  std::size_t size() const;
  const geometry::PointCloud2D& points2d() const { return std::get<geometry::PointCloud2D>(points); }
  const geometry::PointCloud3D& points3d() const { return std::get<geometry::PointCloud3D>(points); }
  ndiff::Tensor tensor() const;
};

// Thresholds the raster at 0.5, takes the centre pixel of every foreground
// cell, maps the raster square onto [−0.5, 0.5]² with y up, then draws
// `sample_count` of those points uniformly with replacement.
Pattern glyph_to_pattern(char c, std::size_t sample_count = 512, std::uint64_t seed = 0);

// Reads an XYZ file. With `normalize`, translates the centroid to the
// origin and scales isotropically so the largest |coordinate| is 0.5.
// Throws with the line number on parse errors and rejects < 8 points.
Pattern load_custom_pattern(const std::filesystem::path& path, bool normalize);

inline constexpr std::size_t kMinCustomPoints = 8;

// XYZ text: one "x y z" per line, '#' starts a comment.
geometry::PointCloud3D read_xyz(const std::filesystem::path& path);
void write_xyz(const std::filesystem::path& path, const geometry::PointCloud3D& cloud,
               const std::vector<std::string>& header = {});

// Writes the pattern as XYZ (2D patterns get z = 0) with a header comment
// recording kind and dimensionality so load_pattern can restore it.
void save_pattern(const std::filesystem::path& path, const Pattern& pattern);
Pattern load_pattern(const std::filesystem::path& path);

}  // namespace geocloak::patterns
