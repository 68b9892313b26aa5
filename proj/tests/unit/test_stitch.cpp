#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "evtac/errors.hpp"
#include "evtac/stitch.hpp"
#include "fixtures.hpp"

namespace evtac {
namespace {

DepthMap plane_map(const CameraIntrinsics& k, double z, const PoseSE3& ref, int step = 1) {
  DepthMap m(k.width, k.height);
  for (int y = 0; y < k.height; y += step)
    for (int x = 0; x < k.width; x += step) m.set(x, y, z);
  m.reference = ref;
  return m;
}

// Residual of the least-squares plane through the cloud (smallest singular value).
double plane_fit_rms(const PointCloud& c) {
  Vec3 mean = Vec3::Zero();
  for (const auto& p : c.points) mean += p;
  mean /= static_cast<double>(c.size());
  Eigen::MatrixXd a(c.size(), 3);
  for (std::size_t i = 0; i < c.size(); ++i) a.row(static_cast<Eigen::Index>(i)) = (c.points[i] - mean).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  return svd.singularValues()(2) / std::sqrt(static_cast<double>(c.size()));
}

PointCloud bumpy_cloud(std::uint64_t seed, std::size_t n = 3000) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = u(rng), y = u(rng);
    c.points.emplace_back(x, y, 47.0 - 0.5 * std::exp(-(x * x + y * y) / 4.0) - 0.2 * std::sin(x));
    c.scalar.push_back(c.points.back().z());
  }
  return c;
}

TEST(DepthToCloud, PrincipalPixel) {
  CameraIntrinsics k;
  DepthMap m(640, 480);
  m.set(320, 240, 47.0);
  auto c = depth_to_cloud(m, k, PoseSE3::identity());
  ASSERT_EQ(c.size(), 1u);
  EXPECT_LT((c.points[0] - Vec3(0, 0, 47)).norm(), 1e-12);
  EXPECT_THROW(depth_to_cloud(DepthMap(640, 480), k, PoseSE3::identity()), InvalidInputError);
}

TEST(DepthToCloud, ProjectsBackToItsPixels) {
  auto k = test::small_camera();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> z(44, 48);
  DepthMap m(k.width, k.height);
  for (int y = 0; y < k.height; y += 3)
    for (int x = 0; x < k.width; x += 2) m.set(x, y, z(rng));
  const auto pose = test::random_pose(rng, 0.2, 5.0);
  auto c = depth_to_cloud(m, k, pose);
  ASSERT_EQ(c.size(), m.valid_count());
  std::size_t i = 0;
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      if (!m.is_valid(x, y)) continue;
      auto px = project(pose.inverse().apply(c.points[i++]), k);
      EXPECT_NEAR(px.u, x, 1e-9);
      EXPECT_NEAR(px.v, y, 1e-9);
    }
  }
}

TEST(DepthToCloud, ConstantMapIsPlanar) {
  auto k = test::small_camera();
  auto c = depth_to_cloud(plane_map(k, 47.0, PoseSE3::identity()), k, PoseSE3::identity());
  EXPECT_LT(plane_fit_rms(c), 1e-9);
}

TEST(Icp, IdentityOnSameCloud) {
  auto c = bumpy_cloud(1);
  auto r = icp_align(c, c, PoseSE3::identity());
  EXPECT_LT(r.rms_mm, 1e-9);
  EXPECT_LT((r.transform.matrix() - Mat4::Identity()).norm(), 1e-9);
  EXPECT_TRUE(r.converged);
}

TEST(Icp, RecoversTranslationFromOffsetPrior) {
  auto dst = bumpy_cloud(2);
  PointCloud src = dst.transformed(PoseSE3::from_translation(-5, 0, 0));
  auto r = icp_align(src, dst, PoseSE3::from_translation(4.5, 0, 0));
  EXPECT_LT((r.transform.translation() - Vec3(5, 0, 0)).norm(), 1e-3);
  EXPECT_GE(r.correspondences, 10u);
}

TEST(Icp, FailsWithoutOverlap) {
  auto c = bumpy_cloud(3);
  EXPECT_THROW(icp_align(c, c, PoseSE3::from_translation(100, 0, 0)), AlignmentError);
}

TEST(Icp, ResidualNeverIncreases) {
  // The accepted steps end with an RMS no larger than the prior's.
  auto dst = bumpy_cloud(4);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto truth = PoseSE3(test::random_rotation(rng, 0.02), Vec3(0.3, -0.2, 0.05));
    PointCloud src = dst.transformed(truth.inverse());
    IcpOptions opt;
    opt.max_iterations = 1;
    auto one = icp_align(src, dst, PoseSE3::identity(), opt);
    opt.max_iterations = 50;
    auto many = icp_align(src, dst, PoseSE3::identity(), opt);
    EXPECT_LE(many.rms_mm, one.rms_mm + 1e-12);
  }
}

TEST(Assemble, SingleWindowIsUnchanged) {
  auto k = test::small_camera();
  const auto ref = PoseSE3::from_translation(2, 0, 0, 1000);
  auto m = plane_map(k, 47.0, ref, 4);
  StitchOptions opt;
  opt.voxel_mm = 0.0;
  auto r = assemble(std::span(&m, 1), k, opt);
  auto direct = depth_to_cloud(m, k, ref);
  ASSERT_EQ(r.cloud.size(), direct.size());
  for (std::size_t i = 0; i < direct.size(); ++i) EXPECT_LT((r.cloud.points[i] - direct.points[i]).norm(), 1e-12);
  EXPECT_TRUE(r.alignments.empty());
}

TEST(Assemble, ExactPosesWithoutIcpIsConcatenation) {
  auto k = test::small_camera();
  std::vector<DepthMap> maps;
  PointCloud expected;
  for (int i = 0; i < 3; ++i) {
    const auto ref = PoseSE3::from_translation(3.0 * i, 0, 0, i * 10'000);
    maps.push_back(plane_map(k, 47.0, ref, 5));
    expected.append(depth_to_cloud(maps.back(), k, ref));
  }
  StitchOptions opt;
  opt.use_icp = false;
  opt.voxel_mm = 0.0;
  auto r = assemble(maps, k, opt);
  ASSERT_EQ(r.cloud.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_LT((r.cloud.points[i] - expected.points[i]).norm(), 1e-9);
  EXPECT_LT(plane_fit_rms(r.cloud), 1e-9);
}

TEST(Assemble, TwoPlaneWindowsStayPlanar) {
  auto k = test::small_camera();
  std::vector<DepthMap> maps{plane_map(k, 47.0, PoseSE3::from_translation(0, 0, 0, 0), 2),
                             plane_map(k, 47.0, PoseSE3::from_translation(6, 0, 0, 20'000), 2)};
  auto r = assemble(maps, k);
  const double spacing = 47.0 - 1.0 / (1.0 / 47.0 + (1.0 / 40.0 - 1.0 / 50.0) / 63.0);
  EXPECT_LT(plane_fit_rms(r.cloud), spacing);
}

TEST(Assemble, SkipsEmptyWindows) {
  auto k = test::small_camera();
  std::vector<DepthMap> maps{plane_map(k, 47.0, PoseSE3::identity(0), 4), DepthMap(k.width, k.height)};
  maps[1].reference = PoseSE3::from_translation(3, 0, 0, 20'000);
  auto r = assemble(maps, k);
  EXPECT_EQ(r.poses.size(), 1u);
  std::vector<DepthMap> none{DepthMap(k.width, k.height)};
  EXPECT_THROW(assemble(none, k), InvalidInputError);
}

TEST(VoxelDownsample, AveragesPerVoxel) {
  PointCloud c;
  c.points = {Vec3(0.01, 0.01, 0.01), Vec3(0.03, 0.03, 0.03), Vec3(1.0, 1.0, 1.0)};
  c.scalar = {1.0, 3.0, 5.0};
  auto d = voxel_downsample(c, 0.05);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_LT((d.points[0] - Vec3(0.02, 0.02, 0.02)).norm(), 1e-12);
  EXPECT_DOUBLE_EQ(d.scalar[0], 2.0);
}

TEST(EvaluateSurface, ExactOffsetAndNoise) {
  SurfaceModel la(LineArrayShape{{0.6, 0.6, 0.6}, 2.0, 4.0, 16.0});
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> x(-2, 12), y(-6, 6), n(-0.08, 0.08);
  PointCloud exact, offset, noisy;
  for (int i = 0; i < 20'000; ++i) {
    const double px = x(rng), py = y(rng), z = la.membrane_depth(px, py);
    exact.points.emplace_back(px, py, z);
    offset.points.emplace_back(px, py, z + 0.05);
    noisy.points.emplace_back(px, py, z + n(rng));
  }
  EXPECT_EQ(evaluate_surface(exact, la).mae_mm, 0.0);
  EXPECT_NEAR(evaluate_surface(offset, la).mae_mm, 0.05, 1e-12);
  EXPECT_NEAR(evaluate_surface(noisy, la).mae_mm, 0.04, 0.05 * 0.04);
  auto m = evaluate_surface(exact, la);
  ASSERT_EQ(m.regions.size(), 4u);
  EXPECT_EQ(m.regions[0].region, -1);
  EXPECT_NEAR(m.regions[1].mean_depth_mm, 46.4, 0.05);
  EXPECT_THROW(evaluate_surface(PointCloud{}, la), UndefinedMetricError);
}

TEST(EvaluateSurface, OrderInvariant) {
  SurfaceModel la(LineArrayShape{});
  auto c = bumpy_cloud(7);
  auto shuffled = c;
  std::shuffle(shuffled.points.begin(), shuffled.points.end(), std::mt19937_64(8));
  auto a = evaluate_surface(c, la), b = evaluate_surface(shuffled, la);
  EXPECT_NEAR(a.mae_mm, b.mae_mm, 1e-12);
  EXPECT_NEAR(a.rmse_mm, b.rmse_mm, 1e-12);
  ASSERT_EQ(a.regions.size(), b.regions.size());
  for (std::size_t i = 0; i < a.regions.size(); ++i) {
    EXPECT_EQ(a.regions[i].n_points, b.regions[i].n_points);
    EXPECT_NEAR(a.regions[i].std_depth_mm, b.regions[i].std_depth_mm, 1e-9);
  }
}

TEST(Ply, RoundTrip) {
  test::TempDir dir;
  auto c = bumpy_cloud(9, 50);
  write_ply(dir / "c.ply", c);
  auto back = read_ply(dir / "c.ply");
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_LT((back.points[i] - c.points[i]).norm(), 1e-4);
}

}  // namespace
}  // namespace evtac
