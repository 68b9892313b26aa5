#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "evtac/calibration.hpp"
#include "evtac/errors.hpp"
#include "scenes.hpp"

namespace evtac {
namespace {

DepthMap disk_map(int w, int h, double cx, double cy, double r, double depth = 46.5) {
  DepthMap m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (std::hypot(x - cx, y - cy) <= r) m.set(x, y, depth);
  return m;
}

TEST(ContactCircle, Disk) {
  auto m = disk_map(640, 480, 320, 240, 50);
  auto c = detect_contact_circle(m);
  EXPECT_NEAR(c.r, 50.0, 1.0);
  EXPECT_NEAR(c.x_b, 320.0, 1.0);
  EXPECT_NEAR(c.y_b, 240.0, 1.0);
}

TEST(ContactCircle, FullFrameCircumscribes) {
  DepthMap m(64, 48);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x) m.set(x, y, 47.0);
  auto c = detect_contact_circle(m);
  EXPECT_NEAR(c.x_b, 31.5, 0.5);
  EXPECT_NEAR(c.y_b, 23.5, 0.5);
  EXPECT_NEAR(c.r, std::hypot(31.5, 23.5), 1.0);
}

TEST(ContactCircle, LargestComponentWins) {
  DepthMap m(200, 100);
  for (int y = 10; y < 30; ++y)
    for (int x = 10; x < 30; ++x) m.set(x, y, 46.0);  // 400 px
  for (int y = 60; y < 65; ++y)
    for (int x = 150; x < 158; ++x) m.set(x, y, 46.0);  // 40 px
  auto c = detect_contact_circle(m);
  EXPECT_NEAR(c.x_b, 19.5, 0.5);
  EXPECT_NEAR(c.y_b, 19.5, 0.5);
}

TEST(ContactCircle, IndentationThresholdAndEmpty) {
  DepthMap flat(64, 48);
  EXPECT_THROW(detect_contact_circle(flat), EmptyContactError);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x) flat.set(x, y, 47.0);
  ContactOptions co;
  co.min_indentation_mm = 0.05;
  EXPECT_THROW(detect_contact_circle(flat, co), EmptyContactError);
  flat.set(10, 10, 46.5);
  auto c = detect_contact_circle(flat, co);
  EXPECT_NEAR(c.x_b, 10.0, 0.5);
}

TEST(SphereCentre, Examples) {
  EXPECT_DOUBLE_EQ(sphere_center_depth(0.0, 94.79), -94.79);
  EXPECT_DOUBLE_EQ(sphere_center_depth(94.79, 94.79), 0.0);
  // -sqrt(94.79^2 - 50^2)
  EXPECT_NEAR(sphere_center_depth(50.0, 94.79), -80.53, 0.005);
  EXPECT_THROW(sphere_center_depth(95.0, 94.79), GeometryError);
  EXPECT_THROW(sphere_center_depth(-1.0, 94.79), GeometryError);
}

TEST(SphereGroundTruth, ClosedFormCentreAndRim) {
  const ScaleFactor f{0.0422};
  auto gt = sphere_ground_truth({50.0, 320.0, 240.0}, 4.0, f, 640, 480);
  const double r_px = 4.0 / 0.0422;
  EXPECT_NEAR(gt.r_sphere_px, r_px, 1e-12);
  const double centre_px = r_px - std::sqrt(r_px * r_px - 50.0 * 50.0);
  EXPECT_NEAR(gt.indentation_px(320, 240), centre_px, 1e-9);
  EXPECT_NEAR(centre_px, 14.26, 0.01);
  EXPECT_NEAR(gt.indentation(320, 240), 0.602, 0.001);
  EXPECT_NEAR(gt.indentation_px(370, 240), 0.0, 1e-9);
  EXPECT_NEAR(gt.indentation_px(320, 190), 0.0, 1e-9);
  EXPECT_FALSE(gt.mask(371, 240));
  EXPECT_DOUBLE_EQ(gt.depth(320, 240), 47.0 - gt.indentation(320, 240));
}

TEST(SphereGroundTruth, EveryMaskedPixelSatisfiesSphereEquation) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> r(5.0, 90.0), cx(200, 440), cy(150, 330);
  for (int trial = 0; trial < 10; ++trial) {
    auto gt = sphere_ground_truth({r(rng), cx(rng), cy(rng)}, 4.0, ScaleFactor{}, 640, 480);
    ASSERT_GT(gt.mask_count(), 0u);
    for (int y = 0; y < 480; ++y)
      for (int x = 0; x < 640; ++x)
        if (gt.mask(x, y)) ASSERT_LT(gt.sphere_residual(x, y), 1e-9);
  }
}

TEST(SphereGroundTruth, Errors) {
  EXPECT_THROW(sphere_ground_truth({100.0, 320, 240}, 4.0, ScaleFactor{0.0422}, 640, 480), GeometryError);
  EXPECT_THROW(sphere_ground_truth({10.0, 320, 240}, 4.0, ScaleFactor{0.0}, 640, 480), ConfigError);
}

class MaskedMae : public ::testing::Test {
 protected:
  void SetUp() override {
    gt = sphere_ground_truth({60.0, 320.0, 240.0}, 4.0, ScaleFactor{0.0422}, 640, 480);
    exact = DepthMap(640, 480);
    for (int y = 0; y < 480; ++y)
      for (int x = 0; x < 640; ++x)
        if (gt.mask(x, y)) exact.set(x, y, gt.depth(x, y));
  }
  GroundTruthDepth gt;
  DepthMap exact;
};

TEST_F(MaskedMae, ExactIsZero) {
  auto r = masked_mae(exact, gt);
  EXPECT_EQ(r.mae_mm, 0.0);
  EXPECT_EQ(r.coverage, 1.0);
  EXPECT_EQ(r.n, gt.mask_count());
}

TEST_F(MaskedMae, ConstantOffsetIsDetectedExactly) {
  for (double c : {0.05, -0.2, 0.7}) {
    DepthMap z = exact;
    for (auto& d : z.depth.values()) d += c;
    EXPECT_NEAR(masked_mae(z, gt).mae_mm, std::abs(c), 1e-12);
  }
}

TEST_F(MaskedMae, UniformNoiseAveragesHalfAmplitude) {
  ASSERT_GE(gt.mask_count(), 10'000u);
  std::mt19937_64 rng(8);
  const double u = 0.1;
  std::uniform_real_distribution<double> n(-u, u);
  DepthMap z = exact;
  for (int y = 0; y < 480; ++y)
    for (int x = 0; x < 640; ++x)
      if (z.is_valid(x, y)) z.depth(x, y) += n(rng);
  EXPECT_NEAR(masked_mae(z, gt).mae_mm, u / 2, 0.05 * u / 2);
}

TEST_F(MaskedMae, StrictModeChargesMissingPixels) {
  DepthMap half = exact;
  for (int y = 0; y < 240; ++y)
    for (int x = 0; x < 640; ++x) half.clear(x, y);
  auto lenient = masked_mae(half, gt, MaskMode::valid_intersection);
  auto strict = masked_mae(half, gt, MaskMode::strict);
  EXPECT_EQ(lenient.mae_mm, 0.0);
  EXPECT_GT(strict.mae_mm, 0.0);
  EXPECT_NEAR(strict.coverage, lenient.coverage, 1e-15);
  EXPECT_LT(lenient.coverage, 0.55);
  EXPECT_THROW(masked_mae(DepthMap(640, 480), gt), UndefinedMetricError);
}

TEST(CalibGridSpec, WeightLattice) {
  auto g = CalibGrid::full();
  auto w = g.weights();
  EXPECT_EQ(w.size(), 190u);  // C(20, 2)
  EXPECT_EQ(g.c_values.size(), 16u);
  EXPECT_EQ(g.g_f_values.size(), 41u);
  bool has_table = false;
  for (const auto& x : w) {
    EXPECT_NEAR(x.w_s + x.w_m + x.w_e, 1.0, 1e-12);
    has_table |= std::abs(x.w_s - 0.445) < 0.001 && std::abs(x.w_m - 0.333) < 0.001 && std::abs(x.w_e - 0.222) < 0.001;
  }
  EXPECT_TRUE(has_table);
  for (std::size_t i = 1; i < w.size(); ++i) EXPECT_LT(w[i - 1].as_array(), w[i].as_array());
  EXPECT_EQ(test::reduced_grid().size(), 3u * 3u * 28u);
}

TEST(CalibParamsSpec, Validation) {
  EXPECT_NO_THROW(CalibParams{}.validate());
  EXPECT_THROW((CalibParams{4, 45, {}}).validate(), ConfigError);
  EXPECT_THROW((CalibParams{16, 44, {}}).validate(), ConfigError);
  EXPECT_THROW((CalibParams{16, 45, {0.5, 0.5, 0.5}}).validate(), ConfigError);
}

TEST(TieBreak, Order) {
  const FusionWeights a{0.5, 0.0, 0.5}, b{0.5, 0.5, 0.0};
  EXPECT_TRUE(tie_break_less({5, 91, b}, {6, 11, a}));
  EXPECT_TRUE(tie_break_less({5, 11, b}, {5, 13, a}));
  EXPECT_TRUE(tie_break_less({5, 11, a}, {5, 11, b}));
  EXPECT_FALSE(tie_break_less({5, 11, a}, {5, 11, a}));
}

class SphereCalibration : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { scene_ = test::make_sphere_scene(6.0).release(); }
  static void TearDownTestSuite() {
    delete scene_;
    scene_ = nullptr;
  }
  static test::SphereScene* scene_;
};
test::SphereScene* SphereCalibration::scene_ = nullptr;

TEST_F(SphereCalibration, SinglePointGrid) {
  CalibGrid g;
  g.c_values = {12};
  g.g_f_values = {45};
  g.simplex_steps = 1;
  auto r = grid_search(std::span(&scene_->target, 1), g);
  EXPECT_EQ(r.evaluated + r.skipped, 3u);
  EXPECT_EQ(r.params.c, 12);
  EXPECT_EQ(r.params.g_f, 45);
}

TEST_F(SphereCalibration, ExhaustiveAuditAndDeterminism) {
  CalibOptions opt;
  opt.record_all = true;
  opt.threads = 1;
  auto grid = test::reduced_grid();
  auto r = grid_search(std::span(&scene_->target, 1), grid, opt);
  ASSERT_EQ(r.points.size(), r.evaluated);
  EXPECT_EQ(r.evaluated + r.skipped, grid.size());
  for (const auto& p : r.points) {
    EXPECT_LE(r.mae_mm, p.mae_mm);
    if (p.mae_mm == r.mae_mm) EXPECT_FALSE(tie_break_less(p.params, r.params));
  }
  opt.threads = 3;
  auto again = grid_search(std::span(&scene_->target, 1), grid, opt);
  EXPECT_EQ(again.params, r.params);
  EXPECT_EQ(again.mae_mm, r.mae_mm);
}

TEST_F(SphereCalibration, GridScoreMatchesFullPipeline) {
  auto grid = test::reduced_grid();
  CalibOptions opt;
  opt.record_all = true;
  auto r = grid_search(std::span(&scene_->target, 1), grid, opt);
  // Every fifteenth point plus the optimum through the full reconstruction.
  for (std::size_t i = 0; i < r.points.size(); i += 15) {
    auto e = evaluate_params(scene_->target, r.points[i].params, opt);
    EXPECT_DOUBLE_EQ(e.mae_mm, r.points[i].mae_mm) << "point " << i;
  }
  EXPECT_DOUBLE_EQ(evaluate_params(scene_->target, r.params, opt).mae_mm, r.mae_mm);
}

TEST_F(SphereCalibration, CrossValidation) {
  CalibOptions opt;
  auto r = grid_search(std::span(&scene_->target, 1), test::reduced_grid(), opt);
  const std::vector<CalibParams> cands{CalibParams{}, r.params, CalibParams{20, 11, {0.0, 1.0, 0.0}}};
  auto cv = cross_validate(std::span(&scene_->target, 1), cands, opt);
  EXPECT_EQ(cv.best, 1u);
  EXPECT_DOUBLE_EQ(cv.e[1], r.mae_mm);
  const std::vector<CalibParams> same{r.params, r.params};
  auto cv2 = cross_validate(std::span(&scene_->target, 1), same, opt);
  EXPECT_EQ(cv2.e[0], cv2.e[1]);
}

}  // namespace
}  // namespace evtac
