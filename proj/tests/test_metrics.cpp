#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "geocloak/cloak.hpp"
#include "geocloak/metrics.hpp"
#include "geocloak/scene.hpp"
#include "support.hpp"

using namespace geocloak;
using namespace geocloak::metrics;
using geocloak::testkit::random_image;

namespace {

const encoder::ReferenceEncoder& encoder7() {
  static const encoder::ReferenceEncoder enc(7);
  return enc;
}

// Direct 2D windowed sums with a 2D Gaussian built from scratch.
double ssim_oracle(const Image& a, const Image& b) {
  const int k = 11;
  double w[11][11], total = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) total += w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
  for (auto& row : w)
    for (double& v : row) v /= total;
  const double c1 = 0.0001, c2 = 0.0009;
  double sum = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    double channel = 0.0;
    std::size_t windows = 0;
    for (std::size_t y = 0; y + k <= a.height(); ++y)
      for (std::size_t x = 0; x + k <= a.width(); ++x) {
        double mx = 0, my = 0;
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) {
            mx += w[i][j] * a.at(c, y + i, x + j);
            my += w[i][j] * b.at(c, y + i, x + j);
          }
        double vx = 0, vy = 0, cov = 0;
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) {
            const double dx = a.at(c, y + i, x + j) - mx, dy = b.at(c, y + i, x + j) - my;
            vx += w[i][j] * dx * dx;
            vy += w[i][j] * dy * dy;
            cov += w[i][j] * dx * dy;
          }
        channel += (2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++windows;
      }
    sum += channel / double(windows);
  }
  return sum / 3.0;
}

}  // namespace

TEST(Psnr, IdenticalImagesAreInfinite) {
  Rng rng(1);
  const auto a = random_image(rng, 16, 16);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
}

TEST(Psnr, ClosedFormUniformPair) {
  EXPECT_NEAR(psnr(Image(8, 8, 0.5), Image(8, 8, 0.25)), 10.0 * std::log10(16.0), 1e-12);
  EXPECT_NEAR(psnr(Image(8, 8, 0.5), Image(8, 8, 0.25)), 12.0412, 1e-3);
}

TEST(Psnr, SymmetricAndShapeChecked) {
  Rng rng(2);
  const auto a = random_image(rng, 12, 9), b = random_image(rng, 12, 9);
  EXPECT_EQ(psnr(a, b), psnr(b, a));
  EXPECT_THROW(psnr(a, Image(9, 12)), std::invalid_argument);
}

TEST(Psnr, DecreasesAsErrorGrows) {
  Rng rng(3);
  const auto a = random_image(rng, 16, 16);
  const auto d = testkit::random_values(rng, a.size());
  double previous = std::numeric_limits<double>::infinity();
  for (double t : {0.01, 0.02, 0.04}) {
    Image b = a;
    for (std::size_t i = 0; i < b.size(); ++i) b.values()[i] += t * d[i];
    const double p = psnr(a, b);
    EXPECT_LT(p, previous);
    previous = p;
  }
}

TEST(Ssim, SelfSimilarityIsOne) {
  Rng rng(4);
  const auto a = random_image(rng, 32, 24);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, HalfContrastIsLess) {
  Rng rng(5);
  const auto a = random_image(rng, 24, 24);
  Image b = a;
  for (double& v : b.values()) v = 0.5 + 0.5 * (v - 0.5);
  EXPECT_LT(ssim(a, b), 1.0);
}

TEST(Ssim, MatchesBruteForceOracle) {
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    const std::size_t h = 11 + rng.index(10), w = 11 + rng.index(10);
    const auto a = random_image(rng, h, w);
    Image b = a;
    for (double& v : b.values()) v = std::clamp(v + rng.uniform(-0.3, 0.3), 0.0, 1.0);
    EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-9);
  }
}

TEST(Ssim, RejectsImagesSmallerThanWindow) {
  EXPECT_THROW(ssim(Image(10, 20), Image(10, 20)), std::invalid_argument);
  EXPECT_THROW(ssim(Image(20, 20), Image(20, 21)), std::invalid_argument);
}

TEST(Distortion, ParseAndMenu) {
  EXPECT_EQ(parse_distortion("gauss:2").kind, DistortionKind::Gauss);
  EXPECT_EQ(parse_distortion("brightness:1.25").parameter, 1.25);
  EXPECT_EQ(parse_distortion("downsample:4").name(), "downsample:4");
  EXPECT_THROW(parse_distortion("jpeg:90"), std::invalid_argument);
  EXPECT_THROW(parse_distortion("gauss:3"), std::invalid_argument);
  EXPECT_THROW(parse_distortion("brightness:2.5"), std::invalid_argument);
  EXPECT_THROW(parse_distortion("downsample:3"), std::invalid_argument);
  EXPECT_THROW(parse_distortion("downsample"), std::invalid_argument);
  EXPECT_EQ(distortion_menu().size(), 6u);
}

TEST(Distortion, BrightnessOneIsIdentity) {
  Rng rng(7);
  const auto a = random_image(rng, 16, 16);
  EXPECT_EQ(apply_distortion(a, parse_distortion("brightness:1")), a);
}

TEST(Distortion, DownsampleKeepsBlockConstantImages) {
  Rng rng(8);
  Image a(16, 16);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 16; y += 2)
      for (std::size_t x = 0; x < 16; x += 2) {
        const double v = rng.uniform();
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) a.at(c, y + dy, x + dx) = v;
      }
  EXPECT_EQ(apply_distortion(a, parse_distortion("downsample:2")), a);
  EXPECT_NE(apply_distortion(a, parse_distortion("downsample:4")), a);
}

TEST(Distortion, OutputsKeepShapeAndRange) {
  Rng rng(9);
  const auto a = random_image(rng, 20, 28);
  for (const auto& d : distortion_menu(3)) {
    const auto out = apply_distortion(a, d);
    EXPECT_TRUE(out.same_shape(a)) << d.name();
    for (double v : out.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Distortion, SeededGaussMatchesGolden) {
  const auto img = scene::bundled_scene().image;
  const auto out = apply_distortion(img, parse_distortion("gauss:1", 42));
  EXPECT_EQ(out, apply_distortion(img, parse_distortion("gauss:1", 42)));
  const nlohmann::json current{{"fnv1a", testkit::hex(testkit::hash_doubles(out.values()))}};
  EXPECT_EQ(current, testkit::golden("gauss1_seed42.json", current));
}

TEST(Evaluate, IdenticalInputs) {
  const auto img = scene::bundled_scene().image;
  const auto r = evaluate(img, img, encoder7());
  EXPECT_TRUE(std::isinf(r.psnr));
  EXPECT_NEAR(r.ssim, 1.0, 1e-12);
  EXPECT_EQ(r.cd, 0.0);
  const auto j = to_json(r);
  EXPECT_EQ(j.at("psnr"), "inf");
  EXPECT_TRUE(j.at("lpips").is_null());
  EXPECT_EQ(j.at("schema"), 1);
}

TEST(Evaluate, DistortionSweepAddsOneReportEach) {
  const auto img = scene::bundled_scene().image;
  Image other = img;
  other.at(0, 30, 30) = 0.0;
  const auto r = evaluate(img, other, encoder7(), distortion_menu(1));
  ASSERT_EQ(r.distortions.size(), distortion_menu().size());
  EXPECT_EQ(r.distortions[2].name, "brightness:1.5");
  EXPECT_EQ(r, evaluate(img, other, encoder7(), distortion_menu(1)));
}

TEST(Evaluate, TargetedDominatesGaussNoise) {
  const auto s = scene::bundled_scene();
  cloak::CloakConfig c;
  c.view = geometry::ViewDirection::parse("xy");
  c.pattern = patterns::glyph_to_pattern('A', 512, 0);
  const auto targeted = cloak::run(s.image, encoder7(), c);
  c.mode = cloak::Mode::GaussNoise;
  const auto noise = cloak::run(s.image, encoder7(), c);
  const double cd_t = evaluate(s.image, cloak::quantize_cloak(s.image, targeted.cloaked, 8), encoder7()).cd;
  const double cd_g = evaluate(s.image, cloak::quantize_cloak(s.image, noise.cloaked, 8), encoder7()).cd;
  EXPECT_GT(cd_t, cd_g);
}

TEST(Report, JsonRoundTripsLosslessly) {
  EvalReport r{std::numeric_limits<double>::infinity(), 0.987654321012345, 1.25e-7,
               {{"gauss:1", 41.123456789, 0.5, 3e-5}, {"downsample:2", 30.0, 0.25, 0.1}}};
  const auto text = to_json(r).dump(2);
  const auto back = eval_report_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back, r);
  EXPECT_EQ(to_json(back).dump(2), text);
}
