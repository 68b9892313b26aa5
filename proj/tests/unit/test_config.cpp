#include <fstream>

#include <gtest/gtest.h>

#include "evtac/config.hpp"
#include "evtac/errors.hpp"
#include "fixtures.hpp"

namespace evtac {
namespace {

TEST(CameraConfig, RoundTrip) {
  CameraConfig c;
  c.intrinsics = test::small_camera();
  c.hand_eye = PoseSE3(Quat(Eigen::AngleAxisd(0.3, Vec3::UnitZ())), Vec3(1, 2, 3));
  auto back = parse_camera_config(camera_config_json(c));
  EXPECT_EQ(back.intrinsics.fx, 150.0);
  EXPECT_EQ(back.intrinsics.width, 160);
  EXPECT_LT((back.hand_eye.matrix() - c.hand_eye.matrix()).norm(), 1e-12);
}

TEST(CameraConfig, MissingHandEyeIsIdentity) {
  auto c = parse_camera_config(R"({"fx": 600, "fy": 600, "cx": 320, "cy": 240, "width": 640, "height": 480})");
  EXPECT_LT((c.hand_eye.matrix() - Mat4::Identity()).norm(), 1e-15);
}

TEST(CameraConfig, Errors) {
  try {
    parse_camera_config(R"({"fx": 600, "fy": 600, "cx": 320, "cy": 240, "width": 640, "height": 480, "fz": 1})");
    FAIL() << "unknown field accepted";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "/fz");
  }
  try {
    parse_camera_config(R"({"fx": "600", "fy": 600, "cx": 320, "cy": 240, "width": 640, "height": 480})");
    FAIL() << "string accepted as number";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "/fx");
  }
  EXPECT_THROW(parse_camera_config(R"({"fx": 600)"), ConfigError);
  EXPECT_THROW(parse_camera_config(
                   R"({"fx": 600, "fy": 600, "cx": 320, "cy": 240, "width": 640, "height": 480, "hand_eye": [1, 2]})"),
               ConfigError);
}

TEST(CalibrationRecord, RoundTrip) {
  CalibrationRecord r;
  r.params.c = 20;
  r.params.g_f = 71;
  r.params.weights = FusionWeights{0.5, 0.0, 0.5};
  r.mae_mm = 0.0553;
  r.coverage = 0.41;
  r.grid_spec = "full";
  r.timestamp = "2026-01-01T00:00:00Z";
  auto back = parse_calibration(calibration_json(r));
  EXPECT_EQ(back.params, r.params);
  EXPECT_EQ(back.mae_mm, r.mae_mm);
  EXPECT_EQ(back.grid_spec, "full");
  EXPECT_EQ(back.timestamp, r.timestamp);
}

TEST(CalibrationRecord, RejectsInvalidParameters) {
  EXPECT_THROW(parse_calibration(R"({"c": 16, "g_f": 44, "w_s": 0.4, "w_m": 0.3, "w_e": 0.3})"), ConfigError);
  EXPECT_THROW(parse_calibration(R"({"c": 16, "g_f": 45, "w_s": 0.4, "w_m": 0.3})"), ConfigError);
  EXPECT_THROW(parse_calibration(R"({"c": 16, "g_f": 45, "w_s": 0.4, "w_m": 0.3, "w_e": 0.3, "extra": 1})"),
               ConfigError);
}

TEST(SurfaceConfig, RoundTripsEveryKind) {
  const std::vector<SurfaceModel> models{
      SurfaceModel(FlatShape{}),
      SurfaceModel(SphereShape{3.0, 0.5}),
      SurfaceModel(StairsShape{}),
      SurfaceModel(SparseSphereShape{}),
      SurfaceModel(LineArrayShape{{0.1, 0.4, 1.2}, 2.0, 4.0, 16.0}, SurfacePlacement{-23.0, 0.0, 47.0, 0.25}),
      SurfaceModel(BraillePlateShape{"hello"}),
  };
  for (const auto& m : models) {
    const std::string text = surface_json(m);
    auto back = parse_surface(text);
    EXPECT_EQ(back.kind(), m.kind());
    EXPECT_EQ(surface_json(back), text);
    for (double x = -5; x <= 30; x += 0.7) EXPECT_EQ(back.membrane_depth(x, 0.3), m.membrane_depth(x, 0.3));
  }
}

TEST(SurfaceConfig, Errors) {
  try {
    parse_surface(R"({"kind": "sphere", "radius_mm": 4, "protusion_mm": 0.6})");
    FAIL() << "typo accepted";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "/protusion_mm");
  }
  try {
    parse_surface(R"({"kind": "sphere", "placement": {"origin_x_mm": "a"}})");
    FAIL() << "bad placement accepted";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "/placement/origin_x_mm");
  }
  EXPECT_THROW(parse_surface(R"({"kind": "torus"})"), ConfigError);
  EXPECT_THROW(parse_surface(R"({"kind": "sphere", "radius_mm": -1})"), ConfigError);
}

TEST(ScanConfig, RoundTrip) {
  ScanConfig c;
  c.intrinsics = test::small_camera();
  c.v_mm_s = 50.0;
  c.x_start_mm = -30;
  c.scan_length_mm = 242;
  c.noise_rate_hz = 2.5;
  c.seed = 99;
  auto back = parse_scan_config(scan_config_json(c));
  EXPECT_EQ(back.intrinsics.width, 160);
  EXPECT_EQ(back.v_mm_s, 50.0);
  EXPECT_EQ(back.x_start_mm, -30.0);
  EXPECT_EQ(back.scan_length_mm, 242.0);
  EXPECT_EQ(back.noise_rate_hz, 2.5);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(scan_config_json(back), scan_config_json(c));
  EXPECT_THROW(parse_scan_config(R"({"v_mm_s": -1})"), ConfigError);
}

TEST(PoseCsv, RoundTrip) {
  test::TempDir dir;
  std::mt19937_64 rng(4);
  std::vector<PoseSE3> samples;
  for (int i = 0; i < 10; ++i) samples.push_back(test::random_pose(rng).with_timestamp(i * 1000));
  Trajectory tr(samples);
  write_pose_csv(dir / "p.csv", tr);
  auto back = read_pose_csv(dir / "p.csv");
  ASSERT_EQ(back.samples().size(), samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(back.samples()[i].timestamp(), samples[i].timestamp());
    EXPECT_LT((back.samples()[i].matrix() - samples[i].matrix()).norm(), 1e-12);
  }
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

TEST(PoseCsv, Errors) {
  test::TempDir dir;
  write_file(dir / "h.csv", "t,x,y,z,qx,qy,qz,qw\n");
  EXPECT_THROW(read_pose_csv(dir / "h.csv"), DataError);
  write_file(dir / "l.csv", "t_us,x_mm,y_mm,z_mm,qx,qy,qz,qw\n0,0,0,0,0,0,0,1\n1000,1,0,0,0,0\n");
  try {
    read_pose_csv(dir / "l.csv");
    FAIL() << "short row accepted";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  write_file(dir / "q.csv", "t_us,x_mm,y_mm,z_mm,qx,qy,qz,qw\n0,0,0,0,0,0,0,2\n");
  EXPECT_THROW(read_pose_csv(dir / "q.csv"), DataError);
  EXPECT_THROW(read_pose_csv(dir / "missing.csv"), DataError);
}

}  // namespace
}  // namespace evtac
