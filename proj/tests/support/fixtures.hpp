#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "evtac/geometry.hpp"
#include "evtac/simulator.hpp"

namespace evtac::test {

/// Quarter-resolution camera with the same field of view as the default one.
inline CameraIntrinsics small_camera() {
  CameraIntrinsics k;
  k.fx = k.fy = 150.0;
  k.cx = 80.0;
  k.cy = 60.0;
  k.width = 160;
  k.height = 120;
  return k;
}

inline Quat random_rotation(std::mt19937_64& rng, double max_angle_rad) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(-max_angle_rad, max_angle_rad);
  Vec3 axis(n(rng), n(rng), n(rng));
  return Quat(Eigen::AngleAxisd(u(rng), axis.normalized()));
}

inline PoseSE3 random_pose(std::mt19937_64& rng, double max_angle_rad = 3.0, double max_t = 10.0) {
  std::uniform_real_distribution<double> u(-max_t, max_t);
  return PoseSE3(random_rotation(rng, max_angle_rad), Vec3(u(rng), u(rng), u(rng)));
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("evtac_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace evtac::test
