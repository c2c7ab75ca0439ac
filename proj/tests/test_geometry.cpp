#include <gtest/gtest.h>

#include <limits>

#include "geocloak/geometry.hpp"
#include "support.hpp"

using namespace geocloak;
using namespace geocloak::geometry;
using geocloak::testkit::numeric_gradient;
using geocloak::testkit::random_cloud;
using geocloak::testkit::relative_error;

namespace {

// O(nm) nearest-neighbour mean, written independently of the library.
template <std::size_t D>
double one_way(const PointCloud<D>& a, const PointCloud<D>& b) {
  double total = 0.0;
  for (const auto& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : b) {
      double d = 0.0;
      for (std::size_t k = 0; k < D; ++k) d += (p[k] - q[k]) * (p[k] - q[k]);
      best = std::min(best, d);
    }
    total += best;
  }
  return total / double(a.size());
}

}  // namespace

TEST(Project, AxisPairsSelectCoordinates) {
  const std::array<double, 3> p{1, 2, 3};
  EXPECT_EQ(ViewDirection::parse("xy").project(p), (std::array<double, 2>{1, 2}));
  EXPECT_EQ(ViewDirection::parse("xz").project(p), (std::array<double, 2>{1, 3}));
  EXPECT_EQ(ViewDirection::parse("yz").project(p), (std::array<double, 2>{2, 3}));
}

TEST(Project, AliasesMapToAxisPairs) {
  EXPECT_EQ(ViewDirection::parse("front").pair(), AxisPair::XY);
  EXPECT_EQ(ViewDirection::parse("top").pair(), AxisPair::XZ);
  EXPECT_EQ(ViewDirection::parse("side").pair(), AxisPair::YZ);
  EXPECT_THROW(ViewDirection::parse("diagonal"), std::invalid_argument);
  EXPECT_THROW(ViewDirection::parse("angle:abc"), std::invalid_argument);
}

TEST(Project, YawZeroEqualsFront) {
  Rng rng(1);
  const auto cloud = random_cloud<3>(rng, 50);
  EXPECT_EQ(project(cloud, ViewDirection::yaw(0.0)), project(cloud, ViewDirection::parse("xy")));
  EXPECT_EQ(project(cloud, ViewDirection::parse("angle:0")), project(cloud, ViewDirection::parse("xy")));
}

TEST(Project, YawNinety) {
  const auto q = ViewDirection::parse("angle:90").project({1, 2, 3});
  EXPECT_NEAR(q[0], -3.0, 1e-15);
  EXPECT_EQ(q[1], 2.0);
}

TEST(Project, LinearInScale) {
  Rng rng(2);
  const auto cloud = random_cloud<3>(rng, 40);
  for (const char* v : {"xy", "xz", "yz"}) {
    const auto view = ViewDirection::parse(v);
    PointCloud3D scaled = cloud;
    for (auto& p : scaled)
      for (double& x : p) x *= 2.0;  // power of two keeps this exact
    auto a = project(scaled, view), b = project(cloud, view);
    for (auto& p : b)
      for (double& x : p) x *= 2.0;
    EXPECT_EQ(a, b);
  }
}

TEST(Project, TapeMatchesPlainProjection) {
  Rng rng(3);
  const auto cloud = random_cloud<3>(rng, 10);
  for (const char* v : {"xy", "xz", "yz", "angle:60"}) {
    const auto view = ViewDirection::parse(v);
    ndiff::Tape tape;
    auto t = project(tape, to_tensor(cloud), view);
    EXPECT_EQ(from_tensor<2>(t), project(cloud, view)) << v;
  }
}

TEST(Chamfer, SelfDistanceIsZero) {
  Rng rng(4);
  const auto p = random_cloud<3>(rng, 100);
  EXPECT_EQ(chamfer(p, p), 0.0);
  EXPECT_EQ(chamfer_accelerated(p, p), 0.0);
}

TEST(Chamfer, SinglePair) {
  PointCloud2D a{{0, 0}}, b{{3, 4}};
  EXPECT_EQ(chamfer(a, b), 50.0);
  EXPECT_EQ(chamfer_accelerated(a, b), 50.0);
}

TEST(Chamfer, RejectsEmptyAndMismatched) {
  PointCloud2D empty, one{{0, 0}};
  EXPECT_THROW(chamfer(empty, one), std::invalid_argument);
  EXPECT_THROW(chamfer_accelerated(one, empty), std::invalid_argument);
  PointCloud3D three{{0, 0, 0}};
  EXPECT_THROW(chamfer_match(view_of(one), view_of(three), ChamferMethod::Grid), std::invalid_argument);
}

TEST(Chamfer, MatchesIndependentOracle) {
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto a = random_cloud<3>(rng, 30), b = random_cloud<3>(rng, 45);
    EXPECT_NEAR(chamfer(a, b), one_way(a, b) + one_way(b, a), 1e-14);
  }
}

TEST(Chamfer, GridEqualsBruteForceOnRandomPairs) {
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto a2 = random_cloud<2>(rng, 100), b2 = random_cloud<2>(rng, 100);
    EXPECT_NEAR(chamfer_accelerated(a2, b2), chamfer(a2, b2), 1e-12);
    const auto a3 = random_cloud<3>(rng, 100), b3 = random_cloud<3>(rng, 100);
    EXPECT_NEAR(chamfer_accelerated(a3, b3), chamfer(a3, b3), 1e-12);
  }
}

TEST(Chamfer, GridHandlesClusteredAndSkewedClouds) {
  Rng rng(7);
  for (int i = 0; i < 30; ++i) {
    auto a = random_cloud<3>(rng, 200, -0.01, 0.01);
    auto b = random_cloud<3>(rng, 20, -2.0, 2.0);
    for (auto& p : a) p[2] *= 1e-6;  // nearly planar
    EXPECT_NEAR(chamfer_accelerated(a, b), chamfer(a, b), 1e-12);
    EXPECT_NEAR(chamfer_accelerated(b, a), chamfer(b, a), 1e-12);
  }
}

TEST(Chamfer, DegenerateCloud) {
  PointCloud3D a(64, {0.1, 0.2, 0.3});
  Rng rng(8);
  const auto b = random_cloud<3>(rng, 50);
  EXPECT_EQ(chamfer_accelerated(a, b), chamfer(a, b));
  EXPECT_EQ(chamfer_accelerated(a, a), 0.0);
}

TEST(Chamfer, TiesGoToLowestIndex) {
  PointCloud2D a{{0, 0}}, b{{1, 0}, {-1, 0}, {0, 1}};
  for (auto method : {ChamferMethod::BruteForce, ChamferMethod::Grid}) {
    auto m = chamfer_match(view_of(a), view_of(b), method);
    EXPECT_EQ(m.nearest_in_b[0], 0u);
  }
}

TEST(Chamfer, CoincidentPointsContributeZero) {
  PointCloud2D a{{0.1, 0.1}, {0.3, 0.3}}, b{{0.1, 0.1}, {0.3, 0.3}, {0.2, -0.4}};
  const auto m = chamfer_match(view_of(a), view_of(b), ChamferMethod::Grid);
  EXPECT_EQ(m.a_to_b, 0.0);
  EXPECT_GT(m.b_to_a, 0.0);
}

TEST(Chamfer, SymmetryIsExact) {
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    const auto a = random_cloud<3>(rng, 37), b = random_cloud<3>(rng, 61);
    EXPECT_EQ(chamfer(a, b), chamfer(b, a));
    EXPECT_EQ(chamfer_accelerated(a, b), chamfer_accelerated(b, a));
  }
}

TEST(Chamfer, TranslationCovariance) {
  Rng rng(10);
  for (int i = 0; i < 50; ++i) {
    auto a = random_cloud<3>(rng, 50), b = random_cloud<3>(rng, 50);
    const double base = chamfer(a, b);
    const std::array<double, 3> t{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    for (auto* c : {&a, &b})
      for (auto& p : *c)
        for (std::size_t k = 0; k < 3; ++k) p[k] += t[k];
    EXPECT_NEAR(chamfer(a, b), base, 1e-12);
    EXPECT_NEAR(chamfer_accelerated(a, b), base, 1e-12);
  }
}

TEST(Chamfer, GradientMatchesFiniteDifferences) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_cloud<3>(rng, 25), b = random_cloud<3>(rng, 30);
    auto ta = to_tensor(a);
    ta.set_requires_grad(true);
    auto tb = to_tensor(b);
    tb.set_requires_grad(true);
    ndiff::Tape tape;
    auto loss = chamfer(tape, ta, tb);
    EXPECT_DOUBLE_EQ(loss.item(), chamfer(a, b));
    tape.backward(loss);

    std::vector<double> av(ta.data().begin(), ta.data().end()), bv(tb.data().begin(), tb.data().end());
    auto f = [&](const std::vector<double>& x, const std::vector<double>& y) {
      return chamfer_match({x, 3}, {y, 3}, ChamferMethod::BruteForce).value;
    };
    EXPECT_LE(relative_error(ta.grad(), numeric_gradient([&](const auto& x) { return f(x, bv); }, av)), 1e-4);
    EXPECT_LE(relative_error(tb.grad(), numeric_gradient([&](const auto& y) { return f(av, y); }, bv)), 1e-4);
  }
}
