#include <gtest/gtest.h>

#include "evtac/errors.hpp"
#include "evtac/pipeline.hpp"
#include "evtac/simulator.hpp"
#include "fixtures.hpp"

namespace evtac {
namespace {

struct SmallSphere {
  ScanConfig cfg;
  SimulatedScan scan;
};

const SmallSphere& small_sphere() {
  static const SmallSphere s = [] {
    SmallSphere out;
    out.cfg.intrinsics = test::small_camera();
    out.cfg.x_start_mm = -3;
    out.cfg.scan_length_mm = 6;
    out.scan = simulate_scan(SurfaceModel(SphereShape{4.0, 0.6}), out.cfg);
    return out;
  }();
  return s;
}

TEST(FusionMethodNames, RoundTrip) {
  for (auto m : {FusionMethod::emvs, FusionMethod::left_right, FusionMethod::bma})
    EXPECT_EQ(parse_fusion_method(to_string(m)), m);
  EXPECT_EQ(parse_fusion_method("left_right"), FusionMethod::left_right);
  EXPECT_THROW(parse_fusion_method("median"), ConfigError);
}

TEST(Windows, StartsTileTheTrajectory) {
  Trajectory tr({PoseSE3::identity(0), PoseSE3::from_translation(10, 0, 0, 95'000)});
  auto starts = window_starts(tr, 20'000);
  ASSERT_EQ(starts.size(), 4u);
  for (std::size_t i = 0; i < starts.size(); ++i) EXPECT_EQ(starts[i], static_cast<TimeUs>(i) * 20'000);
  EXPECT_TRUE(window_starts(Trajectory{}, 20'000).empty());
  EXPECT_THROW(window_starts(tr, 0), ConfigError);
}

TEST(Windows, PosesAtStartMidEnd) {
  Trajectory tr({PoseSE3::identity(0), PoseSE3::from_translation(10, 0, 0, 100'000)});
  auto p = window_poses(tr, 40'000, 20'000);
  EXPECT_EQ(p.t_m, 50'000);
  EXPECT_NEAR(p.pose[0].translation().x(), 4.0, 1e-12);
  EXPECT_NEAR(p.pose[1].translation().x(), 5.0, 1e-12);
  EXPECT_NEAR(p.pose[2].translation().x(), 6.0, 1e-12);
  EXPECT_THROW(window_poses(tr, 90'000, 20'000), OutOfRangeError);
}

TEST(Reconstruct, EmvsMethodReturnsMidMap) {
  const auto& s = small_sphere();
  PipelineParams p;
  p.method = FusionMethod::emvs;
  auto r = reconstruct_window(s.scan.events, s.scan.trajectory, s.cfg.intrinsics, 0, p);
  ASSERT_TRUE(r.own[1].has_value());
  EXPECT_FALSE(r.own[0].has_value());
  EXPECT_EQ(r.fused.valid, r.own[1]->valid);
  EXPECT_EQ(r.fused.depth, r.own[1]->depth);
  EXPECT_GT(r.fused.valid_count(), 0u);
}

TEST(Reconstruct, FusedMapLivesInTheMidFrame) {
  const auto& s = small_sphere();
  PipelineParams p;
  auto r = reconstruct_window(s.scan.events, s.scan.trajectory, s.cfg.intrinsics, 0, p);
  EXPECT_EQ(r.fused.reference.timestamp(), r.poses.t_m);
  EXPECT_EQ(r.fused.t_start, 0);
  EXPECT_EQ(r.fused.t_end, p.window_us);
  for (int i = 0; i < 3; ++i) ASSERT_TRUE(r.warped[i].has_value());
}

TEST(Reconstruct, SummaryMissingRequiredReference) {
  const auto& s = small_sphere();
  PipelineParams emvs;
  emvs.method = FusionMethod::emvs;
  auto sum = build_window_summaries(s.scan.events, s.scan.trajectory, s.cfg.intrinsics, 0, emvs);
  PipelineParams bma;
  EXPECT_THROW(fuse_window(sum, s.cfg.intrinsics, bma), ConfigError);
}

TEST(Reconstruct, ThreadCountDoesNotChangeOutput) {
  const auto& s = small_sphere();
  PipelineParams p;
  p.dsi.threads = 1;
  auto a = reconstruct_window(s.scan.events, s.scan.trajectory, s.cfg.intrinsics, 0, p);
  p.dsi.threads = 3;
  auto b = reconstruct_window(s.scan.events, s.scan.trajectory, s.cfg.intrinsics, 0, p);
  EXPECT_EQ(a.fused.valid, b.fused.valid);
  EXPECT_EQ(a.fused.depth, b.fused.depth);
}

TEST(PipelineParams, Validation) {
  PipelineParams p;
  EXPECT_NO_THROW(p.validate());
  p.g_f = 44;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.window_us = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.weights = FusionWeights{0.5, 0.5, 0.5};
  EXPECT_THROW(p.validate(), ConfigError);
}

}  // namespace
}  // namespace evtac
