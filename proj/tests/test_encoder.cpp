#include <gtest/gtest.h>

#include <fstream>

#include "geocloak/encoder.hpp"
#include "geocloak/scene.hpp"
#include "support.hpp"

using namespace geocloak;
using namespace geocloak::encoder;
using geocloak::testkit::random_image;
using geocloak::testkit::random_values;

namespace {

const ReferenceEncoder& encoder7() {
  static const ReferenceEncoder enc(7);
  return enc;
}

EncoderConfig small_config() {
  EncoderConfig c;
  c.height = c.width = 8;
  c.points = 16;
  c.triplane_size = 4;
  return c;
}

Image perturbed(const Image& base, Rng& rng, double magnitude) {
  Image out = base;
  for (double& v : out.values()) v += rng.uniform() < 0.5 ? -magnitude : magnitude;
  return out;
}

}  // namespace

TEST(Encoder, EncodeIsPureFunctionOfSeedAndImage) {
  const Image zeros(64, 64, 0.0);
  const auto first = encoder7().encode(zeros);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(encoder7().encode(zeros), first);
  EXPECT_EQ(ReferenceEncoder(7).encode(zeros), first);
  EXPECT_NE(ReferenceEncoder(8).encode(zeros), first);
}

TEST(Encoder, PointsStayInCanonicalBox) {
  Rng rng(1);
  for (int i = 0; i < 3; ++i) {
    const auto cloud = encoder7().encode(random_image(rng, 64, 64));
    ASSERT_EQ(cloud.size(), 2048u);
    for (const auto& p : cloud)
      for (double v : p) {
        EXPECT_GE(v, -0.5);
        EXPECT_LE(v, 0.5);
      }
  }
}

TEST(Encoder, WeightsRespectXavierBounds) {
  const auto params = encoder7().parameters();
  ASSERT_EQ(params.size(), 13u);
  const double conv1 = std::sqrt(6.0 / (27.0 + 72.0));
  const double head = std::sqrt(6.0 / (4096.0 + 6144.0));
  for (double v : params[0].data()) EXPECT_LE(std::abs(v), conv1);
  for (double v : params[4].data()) EXPECT_LE(std::abs(v), head);
  EXPECT_EQ(params[4].shape(), (ndiff::Shape{4096, 6144}));
}

TEST(Encoder, ResolutionMismatchNamesBothSizes) {
  try {
    encoder7().encode(Image(32, 48));
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("64x64"), std::string::npos) << msg;
    EXPECT_NE(msg.find("32x48"), std::string::npos) << msg;
  }
}

TEST(Encoder, BudgetPerturbationMovesCloud) {
  const auto s = scene::bundled_scene();
  Rng rng(2);
  const auto moved = encoder7().encode(perturbed(s.image, rng, 8.0 / 255.0));
  EXPECT_GT(geometry::chamfer_accelerated(encoder7().encode(s.image), moved), 0.0);
}

TEST(Encoder, DirectionalDerivativeMatchesFiniteDifference) {
  const auto s = scene::bundled_scene();
  Rng rng(3);
  const auto target = testkit::random_cloud<3>(rng, 256);
  const auto target_t = geometry::to_tensor(target);
  const auto direction = random_values(rng, s.image.size());

  auto input = encoder7().image_tensor(s.image);
  input.set_requires_grad(true);
  ndiff::Tape tape;
  auto loss = geometry::chamfer(tape, encoder7().encode(tape, input), target_t);
  tape.backward(loss);
  double autodiff = 0.0;
  for (std::size_t i = 0; i < direction.size(); ++i) autodiff += input.grad()[i] * direction[i];

  const double h = 1e-5;
  auto at = [&](double t) {
    Image img = s.image;
    auto v = img.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += t * direction[i];
    return geometry::chamfer_accelerated(encoder7().encode(img), target);
  };
  const double numeric = (at(h) - at(-h)) / (2.0 * h);
  EXPECT_LE(std::abs(autodiff - numeric) / std::abs(numeric), 1e-4) << autodiff << " vs " << numeric;
}

TEST(Encoder, DeviationShrinksWithPerturbationScale) {
  const auto s = scene::bundled_scene();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ReferenceEncoder enc(seed);
    const auto clean = enc.encode(s.image);
    double previous = std::numeric_limits<double>::infinity();
    for (double scale : {1.0 / 255.0, 1.0 / 2550.0, 1.0 / 25500.0}) {
      Rng rng(100 + seed);
      const double cd = geometry::chamfer_accelerated(clean, enc.encode(perturbed(s.image, rng, scale)));
      EXPECT_LT(cd, previous) << "seed " << seed << " scale " << scale;
      previous = cd;
    }
  }
}

TEST(Triplane, ConstantPlanesGiveConstantRows) {
  const auto plane = ndiff::Tensor::full({8, 32, 32}, 0.25);
  Triplane tri{plane, plane, plane};
  Rng rng(4);
  const auto f = sample_triplane_features(tri, testkit::random_cloud<3>(rng, 30));
  ASSERT_EQ(f.shape(), (ndiff::Shape{30, 24}));
  for (double v : f.data()) EXPECT_EQ(v, 0.25);
}

TEST(Triplane, CentrePointSamplesCentreTexels) {
  const auto& tri = encoder7().triplane();
  const auto f = sample_triplane_features(tri, {{0.0, 0.0, 0.0}});
  const std::array<const ndiff::Tensor*, 3> planes{&tri.xy, &tri.xz, &tri.yz};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto p = planes[k]->data();
    for (std::size_t c = 0; c < 8; ++c) {
      auto texel = [&](std::size_t y, std::size_t x) { return p[(c * 32 + y) * 32 + x]; };
      // Half-way between texels 15 and 16 on both axes.
      const double expect = 0.25 * (texel(15, 15) + texel(15, 16) + texel(16, 15) + texel(16, 16));
      EXPECT_NEAR(f.data()[k * 8 + c], expect, 1e-15);
    }
  }
}

TEST(Triplane, PermutingPointsPermutesRows) {
  Rng rng(5);
  auto cloud = testkit::random_cloud<3>(rng, 12);
  const auto f = sample_triplane_features(encoder7().triplane(), cloud);
  std::vector<std::size_t> perm{3, 1, 11, 0, 7, 2, 9, 4, 10, 5, 8, 6};
  geometry::PointCloud3D shuffled;
  for (auto i : perm) shuffled.push_back(cloud[i]);
  const auto g = sample_triplane_features(encoder7().triplane(), shuffled);
  for (std::size_t r = 0; r < perm.size(); ++r)
    for (std::size_t c = 0; c < 24; ++c) EXPECT_EQ(g.data()[r * 24 + c], f.data()[perm[r] * 24 + c]);
}

TEST(Attributes, InvariantsOnRandomRawOutputs) {
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    std::array<double, kRawAttributeCount> raw{};
    for (double& v : raw) v = rng.uniform(-10.0, 10.0);
    const auto a = attributes_from_raw(raw);
    EXPECT_GE(a.opacity, 0.0);
    EXPECT_LE(a.opacity, 1.0);
    double norm = 0.0;
    for (double q : a.rotation) norm += q * q;
    EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-9);
    for (double s : a.scale) EXPECT_GT(s, 0.0);
    for (double o : a.offset) EXPECT_LE(std::abs(o), 0.05);
  }
}

TEST(Attributes, ZeroRawOutput) {
  const std::array<double, kRawAttributeCount> raw{};
  const auto a = attributes_from_raw(raw);
  EXPECT_EQ(a.opacity, 0.5);
  EXPECT_EQ(a.scale, (std::array<double, 3>{1, 1, 1}));
  EXPECT_EQ(a.offset, (std::array<double, 3>{0, 0, 0}));
  EXPECT_EQ(a.rotation, (std::array<double, 4>{1, 0, 0, 0}));
}

TEST(Attributes, DecoderRejectsRowMismatch) {
  const auto& dec = encoder7().decoder();
  geometry::PointCloud3D cloud(4, {0, 0, 0});
  EXPECT_THROW(dec.decode(ndiff::Tensor::zeros({3, 24}), ndiff::Tensor::zeros({4, 16}), cloud), ndiff::ShapeError);
  EXPECT_THROW(dec.decode(ndiff::Tensor::zeros({4, 24}), ndiff::Tensor::zeros({5, 16}), cloud), ndiff::ShapeError);
}

TEST(Attributes, BundledSceneMatchesGolden) {
  const auto rec = encoder7().reconstruct(scene::bundled_scene().image);
  std::vector<double> flat;
  for (const auto& a : rec.attributes) {
    flat.insert(flat.end(), a.offset.begin(), a.offset.end());
    flat.push_back(a.opacity);
    flat.insert(flat.end(), a.scale.begin(), a.scale.end());
    flat.insert(flat.end(), a.rotation.begin(), a.rotation.end());
    flat.insert(flat.end(), a.sh.begin(), a.sh.end());
  }
  const auto current = nlohmann::json{{"count", rec.attributes.size()},
                                      {"fnv1a", testkit::hex(testkit::hash_doubles(flat))},
                                      {"first_opacity", rec.attributes.front().opacity}};
  const auto expected = testkit::golden("attributes_seed7.json", current);
  EXPECT_EQ(current, expected);
  EXPECT_EQ(encoder7().reconstruct(scene::bundled_scene().image).attributes, rec.attributes);
}

TEST(Bundle, SaveLoadRoundTrip) {
  testkit::ScratchDir dir("enc");
  const ReferenceEncoder enc(11, small_config());
  enc.save(dir / "w.bin");
  const auto back = ReferenceEncoder::load(dir / "w.bin");
  EXPECT_EQ(back.seed(), 11u);
  EXPECT_EQ(back.config(), small_config());
  const auto a = enc.parameters(), b = back.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].shape(), b[i].shape());
    EXPECT_TRUE(std::equal(a[i].data().begin(), a[i].data().end(), b[i].data().begin()));
  }
  Rng rng(7);
  const auto img = random_image(rng, 8, 8);
  EXPECT_EQ(enc.encode(img), back.encode(img));
}

TEST(Bundle, RejectsCorruptFiles) {
  testkit::ScratchDir dir("enc");
  ReferenceEncoder(1, small_config()).save(dir / "w.bin");
  {
    std::ofstream(dir / "w.bin", std::ios::app | std::ios::binary) << 'x';
  }
  EXPECT_THROW(ReferenceEncoder::load(dir / "w.bin"), std::runtime_error);
  std::ofstream(dir / "bad.bin", std::ios::binary) << "NOTENC";
  EXPECT_THROW(ReferenceEncoder::load(dir / "bad.bin"), std::runtime_error);
}
