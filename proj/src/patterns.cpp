#include "geocloak/patterns.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "geocloak/random.hpp"

namespace geocloak::patterns {

namespace {

constexpr std::string_view kSupported = "ABCDEFGHIJKLMNOPQRSTUVWXYZ123456789";

using GlyphRows = std::array<std::string_view, kFontRows>;

// 5×7 block font, '#' = foreground cell.
constexpr std::array<GlyphRows, 35> kFont{{
    {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"},  // A
    {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."},  // B
    {".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."},  // C
    {"####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."},  // D
    {"#####", "#....", "#....", "####.", "#....", "#....", "#####"},  // E
    {"#####", "#....", "#....", "####.", "#....", "#....", "#...."},  // F
    {".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"},  // G
    {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"},  // H
    {"..#..", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."},  // I
    {"..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."},  // J
    {"#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"},  // K
    {"#....", "#....", "#....", "#....", "#....", "#....", "#####"},  // L
    {"#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"},  // M
    {"#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"},  // N
    {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."},  // O
    {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."},  // P
    {".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"},  // Q
    {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"},  // R
    {".####", "#....", "#....", ".###.", "....#", "....#", "####."},  // S
    {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."},  // T
    {"#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."},  // U
    {"#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."},  // V
    {"#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."},  // W
    {"#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"},  // X
    {"#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."},  // Y
    {"#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"},  // Z
    {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."},  // 1
    {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"},  // 2
    {"####.", "....#", "....#", ".###.", "....#", "....#", "####."},  // 3
    {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."},  // 4
    {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."},  // 5
    {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."},  // 6
    {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."},  // 7
    {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."},  // 8
    {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."},  // 9
}};

const GlyphRows& glyph_rows(char c) {
  const auto pos = kSupported.find(c);
  if (c == '\0' || pos == std::string_view::npos) {
    throw std::invalid_argument("unsupported character '" + std::string(1, c) +
                                "'; supported: " + std::string(kSupported));
  }
  return kFont[pos];
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

struct XyzContents {
  geometry::PointCloud3D cloud;
  std::vector<std::string> comments;
};

XyzContents parse_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  XyzContents out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      out.comments.emplace_back(trim(view.substr(hash + 1)));
      view = view.substr(0, hash);
    }
    view = trim(view);
    if (view.empty()) continue;

    std::array<double, 3> p{};
    std::size_t count = 0;
    bool ok = true;
    while (!view.empty()) {
      const auto end_tok = view.find_first_of(" \t");
      const auto token = view.substr(0, end_tok);
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
      if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value) || count == 3) {
        ok = false;
        break;
      }
      p[count++] = value;
      view = end_tok == std::string_view::npos ? std::string_view{} : trim(view.substr(end_tok));
    }
    if (!ok || count != 3) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected three decimal numbers, got '" + line + "'");
    }
    out.cloud.push_back(p);
  }
  return out;
}

}  // namespace

std::string_view supported_characters() { return kSupported; }

bool is_supported(char c) { return c != '\0' && kSupported.find(c) != std::string_view::npos; }

GlyphRaster rasterize_glyph(char c) {
  const auto& rows = glyph_rows(c);
  GlyphRaster raster{c, std::vector<double>(kRasterSize * kRasterSize, 0.0)};
  for (std::size_t r = 0; r < kFontRows; ++r) {
    for (std::size_t col = 0; col < kFontColumns; ++col) {
      if (rows[r][col] != '#') continue;
      for (std::size_t dy = 0; dy < kCellPixels; ++dy) {
        for (std::size_t dx = 0; dx < kCellPixels; ++dx) {
          const std::size_t py = kRasterOffsetY + r * kCellPixels + dy;
          const std::size_t px = kRasterOffsetX + col * kCellPixels + dx;
          raster.pixels[py * kRasterSize + px] = 1.0;
        }
      }
    }
  }
  return raster;
}

std::size_t Pattern::size() const {
  return std::visit([](const auto& cloud) { return cloud.size(); }, points);
}

ndiff::Tensor Pattern::tensor() const {
  return std::visit([](const auto& cloud) { return geometry::to_tensor(cloud); }, points);
}

Pattern glyph_to_pattern(char c, std::size_t sample_count, std::uint64_t seed) {
  if (sample_count == 0) throw std::invalid_argument("sample_count must be at least 1");
  const auto raster = rasterize_glyph(c);

  // One segment per foreground cell, represented by its centre pixel.
  geometry::PointCloud2D support;
  const double size = static_cast<double>(kRasterSize);
  for (std::size_t r = 0; r < kFontRows; ++r) {
    for (std::size_t col = 0; col < kFontColumns; ++col) {
      const std::size_t py = kRasterOffsetY + r * kCellPixels + kCellPixels / 2;
      const std::size_t px = kRasterOffsetX + col * kCellPixels + kCellPixels / 2;
      if (raster.at(py, px) > 0.5) {
        support.push_back({(static_cast<double>(px) + 0.5) / size - 0.5,
                           0.5 - (static_cast<double>(py) + 0.5) / size});
      }
    }
  }

  Rng rng(seed);
  geometry::PointCloud2D samples;
  samples.reserve(sample_count);
  for (std::size_t i = 0; i < sample_count; ++i) samples.push_back(support[rng.index(support.size())]);
  return {PatternKind::Predefined, std::move(samples), std::string(1, c), seed};
}

geometry::PointCloud3D read_xyz(const std::filesystem::path& path) { return parse_xyz(path).cloud; }

void write_xyz(const std::filesystem::path& path, const geometry::PointCloud3D& cloud,
               const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& line : header) out << "# " << line << '\n';
  for (const auto& p : cloud) {
    out << format_double(p[0]) << ' ' << format_double(p[1]) << ' ' << format_double(p[2]) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Pattern load_custom_pattern(const std::filesystem::path& path, bool normalize) {
  auto cloud = read_xyz(path);
  if (cloud.size() < kMinCustomPoints) {
    throw std::runtime_error(path.string() + ": degenerate pattern with " + std::to_string(cloud.size()) +
                             " points (need at least " + std::to_string(kMinCustomPoints) + ")");
  }
  if (normalize) {
    std::array<double, 3> centroid{};
    for (const auto& p : cloud) {
      for (std::size_t d = 0; d < 3; ++d) centroid[d] += p[d];
    }
    for (double& c : centroid) c /= static_cast<double>(cloud.size());
    double extent = 0.0;
    for (auto& p : cloud) {
      for (std::size_t d = 0; d < 3; ++d) {
        p[d] -= centroid[d];
        extent = std::max(extent, std::abs(p[d]));
      }
    }
    if (extent == 0.0) throw std::runtime_error(path.string() + ": all points coincide, cannot normalize");
    const double factor = 0.5 / extent;
    for (auto& p : cloud) {
      for (double& v : p) v *= factor;
    }
  }
  return {PatternKind::Customized, std::move(cloud), path.string(), 0};
}

void save_pattern(const std::filesystem::path& path, const Pattern& pattern) {
  geometry::PointCloud3D cloud;
  if (pattern.dims() == 2) {
    for (const auto& p : pattern.points2d()) cloud.push_back({p[0], p[1], 0.0});
  } else {
    cloud = pattern.points3d();
  }
  write_xyz(path, cloud,
            {"geocloak pattern",
             std::string("kind: ") + (pattern.kind == PatternKind::Predefined ? "predefined" : "customized"),
             "dims: " + std::to_string(pattern.dims()), "source: " + pattern.source,
             "seed: " + std::to_string(pattern.seed)});
}

Pattern load_pattern(const std::filesystem::path& path) {
  auto contents = parse_xyz(path);
  Pattern pattern;
  pattern.kind = PatternKind::Customized;
  pattern.source = path.string();
  std::size_t dims = 3;
  for (const auto& comment : contents.comments) {
    std::string_view c = comment;
    if (c == "kind: predefined") pattern.kind = PatternKind::Predefined;
    if (c == "dims: 2") dims = 2;
    if (c.starts_with("source: ")) pattern.source = std::string(c.substr(8));
    if (c.starts_with("seed: ")) {
      auto s = c.substr(6);
      std::from_chars(s.data(), s.data() + s.size(), pattern.seed);
    }
  }
  if (contents.cloud.empty()) throw std::runtime_error(path.string() + ": pattern has no points");
  if (dims == 2) {
    geometry::PointCloud2D flat;
    for (const auto& p : contents.cloud) {
      if (p[2] != 0.0) throw std::runtime_error(path.string() + ": 2D pattern has non-zero z");
      flat.push_back({p[0], p[1]});
    }
    pattern.points = std::move(flat);
  } else {
    pattern.points = std::move(contents.cloud);
  }
  return pattern;
}

}  // namespace geocloak::patterns
