#include <array>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "evtac/config.hpp"
#include "evtac/events.hpp"
#include "evtac/stitch.hpp"
#include "fixtures.hpp"

namespace evtac {
namespace {

struct RunResult {
  int code = -1;
  std::string output;  // stdout and stderr
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(EVTAC_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.output.append(buf.data(), n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_file(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

// Small-camera sphere scan written to `dir` through the CLI.
void simulate_small(const test::TempDir& dir, const std::string& out, const std::string& extra = "") {
  ScanConfig cfg;
  cfg.intrinsics = test::small_camera();
  cfg.x_start_mm = -3;
  cfg.scan_length_mm = 6;
  write_file(dir / "scan.json", scan_config_json(cfg));
  write_file(dir / "sphere.json", R"({"kind": "sphere", "radius_mm": 4, "protrusion_mm": 0.6})");
  auto r = run("simulate --surface " + (dir / "sphere.json").string() + " --scan " + (dir / "scan.json").string() +
               " --out-dir " + (dir / out).string() + " " + extra);
  ASSERT_EQ(r.code, 0) << r.output;
}

TEST(Cli, SimulateIsDeterministic) {
  test::TempDir dir;
  simulate_small(dir, "a", "--noise-hz 5 --seed 3");
  simulate_small(dir, "b", "--noise-hz 5 --seed 3 --threads 2");
  const auto a = slurp(dir / "a" / "events.bin");
  EXPECT_GT(a.size(), 16u);
  EXPECT_EQ(a, slurp(dir / "b" / "events.bin"));
  EXPECT_EQ(slurp(dir / "a" / "poses.csv"), slurp(dir / "b" / "poses.csv"));
}

TEST(Cli, ZeroLengthScanGivesHeaderOnly) {
  test::TempDir dir;
  simulate_small(dir, "z", "--v-mm-s 0");
  EventFileInfo info;
  auto ev = read_events_binary(dir / "z" / "events.bin", &info);
  EXPECT_TRUE(ev.empty());
  EXPECT_EQ(info.width, 160);
  EXPECT_EQ(std::filesystem::file_size(dir / "z" / "events.bin"), 16u);
}

TEST(Cli, CorruptEventFileNamesTheOffset) {
  test::TempDir dir;
  simulate_small(dir, "s");
  auto bytes = slurp(dir / "s" / "events.bin");
  ASSERT_GT(bytes.size(), 16u + 3 * 16u);
  bytes.resize(16 + 2 * 16 + 5);
  std::ofstream(dir / "bad.bin", std::ios::binary) << bytes;
  const std::string common = " --poses " + (dir / "s" / "poses.csv").string() + " --camera " +
                             (dir / "s" / "camera.json").string() + " --out-dir " + (dir / "r").string();
  auto r = run("reconstruct --events " + (dir / "bad.bin").string() + common);
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_NE(r.output.find("byte offset 48"), std::string::npos) << r.output;
}

TEST(Cli, BadConfigExitsTwo) {
  test::TempDir dir;
  write_file(dir / "bad.json", R"({"kind": "sphere", "radius": 4})");
  auto r = run("simulate --surface " + (dir / "bad.json").string() + " --out-dir " + (dir / "o").string());
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find("/radius"), std::string::npos) << r.output;
  EXPECT_EQ(run("reconstruct --method median --events x --poses y").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
}

TEST(Cli, MetricThresholdExitsFour) {
  test::TempDir dir;
  PointCloud c;
  c.points = {Vec3(0, 0, 47.2), Vec3(1, 0, 47.2)};
  c.scalar = {47.2, 47.2};
  write_ply(dir / "c.ply", c);
  write_file(dir / "flat.json", R"({"kind": "flat"})");
  const std::string base = "eval --cloud " + (dir / "c.ply").string() + " --surface " + (dir / "flat.json").string();
  EXPECT_EQ(run(base + " --threshold-mm 0.5").code, 0);
  auto r = run(base + " --threshold-mm 0.1");
  EXPECT_EQ(r.code, 4) << r.output;
}

TEST(Cli, ReconstructMethodsAndCalibrationFallback) {
  test::TempDir dir;
  simulate_small(dir, "s");
  const std::string common = " --events " + (dir / "s" / "events.bin").string() + " --poses " +
                             (dir / "s" / "poses.csv").string() + " --camera " + (dir / "s" / "camera.json").string() +
                             " --no-maps --max-windows 1";
  for (const std::string m : {"emvs", "lr", "bma"}) {
    auto r = run("reconstruct --method " + m + common + " --calib " + (dir / "missing.json").string() +
                 " --out-dir " + (dir / m).string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("warning: calibration file"), std::string::npos) << r.output;
    const auto report = slurp(dir / m / "report.json");
    EXPECT_NE(report.find("\"method\": \"" + m + "\""), std::string::npos) << report;
  }
}

TEST(Cli, BenchOnAnEmptyWindow) {
  test::TempDir dir;
  simulate_small(dir, "s");
  auto r = run("bench --poses " + (dir / "s" / "poses.csv").string() + " --camera " +
               (dir / "s" / "camera.json").string() + " --repeats 1");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("\"window_events\": 0"), std::string::npos) << r.output;
}

}  // namespace
}  // namespace evtac
