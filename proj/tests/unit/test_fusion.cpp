#include <random>

#include <gtest/gtest.h>

#include "evtac/emvs.hpp"
#include "evtac/errors.hpp"
#include "evtac/fusion.hpp"
#include "evtac/simulator.hpp"
#include "fixtures.hpp"

namespace evtac {
namespace {

DepthMap constant_map(int w, int h, double z) {
  DepthMap m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, z);
  return m;
}

DepthMap random_sparse_map(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> z(44.0, 48.0), keep(0.0, 1.0);
  DepthMap m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (keep(rng) < 0.4) m.set(x, y, z(rng));
  return m;
}

TEST(Warp, IdentityPosesReproduceInput) {
  auto k = test::small_camera();
  auto m = random_sparse_map(k.width, k.height, 1);
  const auto pose = PoseSE3::from_translation(1, 2, 0, 500);
  auto w = warp_depth(m, pose, pose, k);
  EXPECT_EQ(w.dropped, 0u);
  EXPECT_EQ(w.map.valid, m.valid);
  for (std::size_t i = 0; i < m.depth.size(); ++i) EXPECT_NEAR(w.map.depth.data()[i], m.depth.data()[i], 1e-9);
  EXPECT_EQ(w.source_time, 500);
}

TEST(Warp, TranslationShiftsByParallax) {
  CameraIntrinsics k;
  DepthMap m(640, 480);
  m.set(320, 240, 47.0);
  // Frame m sits 4.7 mm further along +X, so the point appears 60 px to the left.
  auto w = warp_depth(m, PoseSE3::identity(), PoseSE3::from_translation(4.7, 0, 0), k);
  EXPECT_EQ(w.map.valid_count(), 1u);
  ASSERT_TRUE(w.map.is_valid(260, 240));
  EXPECT_NEAR(w.map.depth(260, 240), 47.0, 1e-12);
}

TEST(Warp, CollisionKeepsNearest) {
  // With frame m 10 mm behind along X, pixel 330 at 46 mm lands on 460.43 and
  // pixel 332 at 47 mm on 459.66: both round to column 460.
  CameraIntrinsics k;
  DepthMap m(640, 480);
  m.set(330, 240, 46.0);
  m.set(332, 240, 47.0);
  auto w = warp_depth(m, PoseSE3::identity(), PoseSE3::from_translation(-10.0, 0, 0), k);
  EXPECT_EQ(w.map.valid_count(), 1u);
  ASSERT_TRUE(w.map.is_valid(460, 240));
  EXPECT_NEAR(w.map.depth(460, 240), 46.0, 1e-12);
}

TEST(Warp, PointsLeavingTheImageAreCounted) {
  auto k = test::small_camera();
  auto m = constant_map(k.width, k.height, 47.0);
  auto w = warp_depth(m, PoseSE3::identity(), PoseSE3::from_translation(10.0, 0, 0), k);
  EXPECT_GT(w.dropped, 0u);
  EXPECT_EQ(w.dropped + w.map.valid_count(), m.valid_count());
}

TEST(Warp, RoundTripIsConsistentOnSmoothScene) {
  CameraIntrinsics k;
  SurfaceModel sphere(SphereShape{4.0, 0.6});
  const PoseSE3 ti = PoseSE3::from_translation(-3.0, 0, 0), tm = PoseSE3::identity();
  auto src = ground_truth_depth(sphere, ti, k);
  // Keep a semi-dense band around the sphere.
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x)
      if (std::hypot(x - 358.0, y - 240.0) > 60.0) src.clear(x, y);
  auto there = warp_depth(src, ti, tm, k);
  auto back = warp_depth(there.map, tm, ti, k);
  const double spacing = 47.0 - 1.0 / (1.0 / 47.0 + (1.0 / 40.0 - 1.0 / 50.0) / (DepthPlanes{}.count - 1));
  std::size_t ok = 0, total = 0;
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      if (!src.is_valid(x, y)) continue;
      ++total;
      bool hit = false;
      for (int dy = -1; dy <= 1 && !hit; ++dy)
        for (int dx = -1; dx <= 1 && !hit; ++dx)
          hit = back.map.depth.contains(x + dx, y + dy) && back.map.is_valid(x + dx, y + dy) &&
                std::abs(back.map.depth(x + dx, y + dy) - src.depth(x, y)) <= spacing;
      ok += hit;
    }
  }
  ASSERT_GT(total, 1000u);
  EXPECT_GE(static_cast<double>(ok) / total, 0.95);
}

TEST(Fuse, IdenticalMapsAreReproduced) {
  auto m = random_sparse_map(40, 30, 2);
  for (FusionWeights w : {FusionWeights{}, FusionWeights{1.0, 0.0, 0.0}, FusionWeights{0.5, 0.0, 0.5}}) {
    auto f = fuse_bma({&m, &m, &m}, w);
    EXPECT_EQ(f.valid, m.valid);
    for (std::size_t i = 0; i < m.depth.size(); ++i) EXPECT_NEAR(f.depth.data()[i], m.depth.data()[i], 1e-12);
  }
  auto lr = fuse_left_right(m, m);
  EXPECT_EQ(lr.valid, m.valid);
}

TEST(Fuse, TableWeightsExample) {
  auto s = constant_map(4, 4, 46.0), m = constant_map(4, 4, 47.0), e = constant_map(4, 4, 48.0);
  auto f = fuse_bma({&s, &m, &e}, FusionWeights{0.445, 0.333, 0.222});
  // 0.445 * 46 + 0.333 * 47 + 0.222 * 48 = 46.777
  EXPECT_NEAR(f.depth(2, 2), 46.777, 1e-9);
}

TEST(Fuse, RenormalisesOverValidInputs) {
  DepthMap s(3, 1), m(3, 1), e(3, 1);
  s.set(0, 0, 45.5);
  s.set(1, 0, 46.0);
  e.set(1, 0, 48.0);
  auto f = fuse_bma({&s, &m, &e}, FusionWeights{});
  EXPECT_DOUBLE_EQ(f.depth(0, 0), 45.5);
  EXPECT_NEAR(f.depth(1, 0), (0.445 * 46.0 + 0.222 * 48.0) / (0.445 + 0.222), 1e-12);
  EXPECT_FALSE(f.is_valid(2, 0));
}

TEST(Fuse, LeftRightIsMean) {
  auto s = constant_map(2, 2, 46.0), e = constant_map(2, 2, 48.0);
  EXPECT_DOUBLE_EQ(fuse_left_right(s, e).depth(1, 1), 47.0);
}

TEST(Fuse, StaysWithinContributingRange) {
  auto a = random_sparse_map(50, 40, 3), b = random_sparse_map(50, 40, 4), c = random_sparse_map(50, 40, 5);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<int> step(0, 18);
    const int i = step(rng), j = std::uniform_int_distribution<int>(0, 18 - i)(rng);
    FusionWeights w{i / 18.0, j / 18.0, (18 - i - j) / 18.0};
    auto f = fuse_bma({&a, &b, &c}, w);
    for (int y = 0; y < 40; ++y) {
      for (int x = 0; x < 50; ++x) {
        if (!f.is_valid(x, y)) continue;
        double lo = 1e9, hi = -1e9;
        for (const DepthMap* m : {&a, &b, &c}) {
          if (!m->is_valid(x, y)) continue;
          lo = std::min(lo, m->depth(x, y));
          hi = std::max(hi, m->depth(x, y));
        }
        EXPECT_GE(f.depth(x, y), lo - 1e-12);
        EXPECT_LE(f.depth(x, y), hi + 1e-12);
      }
    }
  }
}

TEST(Fuse, ScalingWeightsChangesNothing) {
  auto a = random_sparse_map(30, 20, 7), b = random_sparse_map(30, 20, 8), c = random_sparse_map(30, 20, 9);
  const std::array<const DepthMap*, 3> maps{&a, &b, &c};
  const std::array<double, 3> w{0.445, 0.333, 0.222};
  const std::array<double, 3> w3{3 * 0.445, 3 * 0.333, 3 * 0.222};
  auto f1 = fuse_weighted(maps, w), f3 = fuse_weighted(maps, w3);
  EXPECT_EQ(f1.valid, f3.valid);
  for (std::size_t i = 0; i < f1.depth.size(); ++i) EXPECT_NEAR(f1.depth.data()[i], f3.depth.data()[i], 1e-12);
}

TEST(Fuse, Errors) {
  DepthMap a(4, 4), b(5, 4);
  EXPECT_THROW(fuse_left_right(a, b), ConfigError);
  EXPECT_THROW(fuse_bma({&a, &a, &a}, FusionWeights{0.5, 0.5, 0.5}), ConfigError);
  EXPECT_THROW(fuse_bma({&a, &a, &a}, FusionWeights{1.2, -0.1, -0.1}), ConfigError);
}

}  // namespace
}  // namespace evtac
