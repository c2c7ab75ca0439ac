#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "geocloak/encoder.hpp"
#include "geocloak/patterns.hpp"
#include "support.hpp"

using namespace geocloak;
using namespace geocloak::patterns;
using geocloak::testkit::ScratchDir;

namespace {

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  for (const auto& l : lines) out << l << '\n';
}

// Centre pixels of every 9×9 foreground block, found by scanning the
// raster rather than the font table.
std::set<std::pair<double, double>> foreground_centres(const GlyphRaster& raster) {
  std::set<std::pair<double, double>> out;
  for (std::size_t y = 0; y + kCellPixels <= kRasterSize; ++y) {
    for (std::size_t x = 0; x + kCellPixels <= kRasterSize; ++x) {
      bool block = true;
      for (std::size_t dy = 0; dy < kCellPixels && block; ++dy)
        for (std::size_t dx = 0; dx < kCellPixels && block; ++dx) block = raster.at(y + dy, x + dx) > 0.5;
      const bool aligned = (x - kRasterOffsetX) % kCellPixels == 0 && (y - kRasterOffsetY) % kCellPixels == 0;
      if (block && aligned && x >= kRasterOffsetX) {
        const double cx = double(x) + 4.0, cy = double(y) + 4.0;
        out.insert({(cx + 0.5) / 64.0 - 0.5, 0.5 - (cy + 0.5) / 64.0});
      }
    }
  }
  return out;
}

}  // namespace

TEST(Glyph, DeterministicForSeed) {
  const auto a = glyph_to_pattern('A', 512, 42), b = glyph_to_pattern('A', 512, 42);
  EXPECT_EQ(a.points2d(), b.points2d());
  EXPECT_EQ(a.size(), 512u);
  EXPECT_NE(glyph_to_pattern('A', 512, 43).points2d(), a.points2d());
}

TEST(Glyph, LetterIUsesItsSingleColumn) {
  const auto raster = rasterize_glyph('I');
  std::set<double> xs;
  for (const auto& c : foreground_centres(raster)) xs.insert(c.first);
  ASSERT_EQ(xs.size(), 1u);
  const auto pattern = glyph_to_pattern('I', 4, 0);
  for (const auto& p : pattern.points2d()) EXPECT_EQ(p[0], *xs.begin());
}

TEST(Glyph, SupportIsExactlyTheForegroundCells) {
  for (char c : supported_characters()) {
    const auto centres = foreground_centres(rasterize_glyph(c));
    ASSERT_FALSE(centres.empty()) << c;
    std::set<std::pair<double, double>> seen;
    const auto pattern = glyph_to_pattern(c, 4000, 1);
    for (const auto& p : pattern.points2d()) {
      EXPECT_TRUE(centres.count({p[0], p[1]})) << c;
      EXPECT_LE(std::abs(p[0]), 0.5);
      EXPECT_LE(std::abs(p[1]), 0.5);
      seen.insert({p[0], p[1]});
    }
    EXPECT_EQ(seen, centres) << c;
  }
}

TEST(Glyph, YAxisPointsUp) {
  // 'T' has its bar on the top row, so the highest y must be on the bar.
  const auto p = glyph_to_pattern('T', 2000, 3).points2d();
  double top = -1.0;
  std::set<double> top_xs;
  for (const auto& q : p) top = std::max(top, q[1]);
  for (const auto& q : p)
    if (q[1] == top) top_xs.insert(q[0]);
  EXPECT_EQ(top_xs.size(), 5u);
}

TEST(Glyph, UnsupportedCharacterListsSupportedSet) {
  try {
    glyph_to_pattern('a');
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("ABCDEFGHIJKLMNOPQRSTUVWXYZ123456789"), std::string::npos);
  }
  EXPECT_THROW(glyph_to_pattern('0'), std::invalid_argument);
  EXPECT_THROW(glyph_to_pattern('A', 0), std::invalid_argument);
}

TEST(CustomPattern, NormalizeMapsToCanonicalBox) {
  ScratchDir dir("pat");
  std::vector<std::string> lines{"# two corners, repeated"};
  for (int i = 0; i < 4; ++i) lines.insert(lines.end(), {"1 1 1", "3 3 3"});
  write_lines(dir / "c.xyz", lines);
  const auto p = load_custom_pattern(dir / "c.xyz", true);
  ASSERT_EQ(p.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    const double expect = i % 2 == 0 ? -0.5 : 0.5;
    for (double v : p.points3d()[i]) EXPECT_EQ(v, expect);
  }
  EXPECT_EQ(p.kind, PatternKind::Customized);
}

TEST(CustomPattern, PassthroughIsBitIdentical) {
  ScratchDir dir("pat");
  Rng rng(4);
  const auto cloud = testkit::random_cloud<3>(rng, 20);
  write_xyz(dir / "c.xyz", cloud);
  EXPECT_EQ(load_custom_pattern(dir / "c.xyz", false).points3d(), cloud);
}

TEST(CustomPattern, ErrorsCarryLineNumbers) {
  ScratchDir dir("pat");
  write_lines(dir / "bad.xyz", {"0 0 0", "# fine", "1 2 x"});
  try {
    load_custom_pattern(dir / "bad.xyz", false);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  write_lines(dir / "short.xyz", {"0 0 0", "1 1 1"});
  EXPECT_THROW(load_custom_pattern(dir / "short.xyz", true), std::runtime_error);
  write_lines(dir / "four.xyz", {"0 0 0 0"});
  EXPECT_THROW(read_xyz(dir / "four.xyz"), std::runtime_error);
}

TEST(CustomPattern, ReconstructionRoundTrips) {
  ScratchDir dir("pat");
  encoder::ReferenceEncoder enc(7);
  Rng rng(5);
  const auto cloud = enc.encode(testkit::random_image(rng, 64, 64));
  ASSERT_EQ(cloud.size(), 2048u);
  write_xyz(dir / "r.xyz", cloud, {"reconstruction"});
  const auto back = load_custom_pattern(dir / "r.xyz", false).points3d();
  ASSERT_EQ(back.size(), cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    for (std::size_t d = 0; d < 3; ++d) EXPECT_NEAR(back[i][d], cloud[i][d], 1e-9);
}

TEST(SavedPattern, RestoresKindAndDimensionality) {
  ScratchDir dir("pat");
  const auto glyph = glyph_to_pattern('K', 100, 9);
  save_pattern(dir / "k.xy", glyph);
  const auto back = load_pattern(dir / "k.xy");
  EXPECT_EQ(back.kind, PatternKind::Predefined);
  EXPECT_EQ(back.dims(), 2u);
  EXPECT_EQ(back.points2d(), glyph.points2d());
  EXPECT_EQ(back.source, "K");
  EXPECT_EQ(back.seed, 9u);
}
