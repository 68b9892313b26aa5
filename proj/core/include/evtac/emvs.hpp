#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "evtac/depth_map.hpp"
#include "evtac/events.hpp"
#include "evtac/geometry.hpp"
#include "evtac/grid.hpp"

namespace evtac {

/// Depth planes spaced linearly in inverse depth over [z_min, z_max].
struct DepthPlanes {
  double z_min = 40.0;
  double z_max = 50.0;
  int count = 64;

  void validate() const;
  /// Strictly increasing depths; index 0 is the nearest plane.
  std::vector<double> depths() const;
};

struct EventWindow {
  TimeUs t_s = 0;
  TimeUs t_e = 0;
  std::span<const Event> events;  // time-sorted, all within [t_s, t_e]

  TimeUs t_m() const { return t_s + (t_e - t_s) / 2; }
};

inline constexpr TimeUs kDefaultWindowUs = 20'000;

/// Slices [t_s, t_s + length] out of a time-sorted stream.
EventWindow make_window(std::span<const Event> sorted, TimeUs t_s, TimeUs length_us = kDefaultWindowUs);

/// Full w x h x N_z vote volume. Plane-major: counts[(z * h + y) * w + x].
struct Dsi {
  int width = 0;
  int height = 0;
  std::vector<double> depths;
  PoseSE3 reference;
  std::vector<std::uint32_t> counts;

  int planes() const { return static_cast<int>(depths.size()); }
  std::uint32_t at(int x, int y, int z) const {
    return counts[(static_cast<std::size_t>(z) * height + y) * width + x];
  }
  std::uint64_t total() const;
};

/// Per-pixel maximum count and the (nearest) plane that attains it. This is
/// all depth extraction needs, and it is built without materialising the volume.
struct DsiSummary {
  Grid<std::uint32_t> confidence;
  Grid<std::uint16_t> argmax;
  std::vector<double> depths;
  PoseSE3 reference;
};

struct DsiOptions {
  DepthPlanes planes;
  int threads = 0;
};

/// Votes every event ray into the reference-view depth planes. The ray of an
/// event starts at the camera centre at the event time; its intersection with
/// plane z is rounded to the nearest voxel and dropped when outside the image.
Dsi build_dsi(const EventWindow& window, const Trajectory& camera_trajectory, const CameraIntrinsics& k,
              TimeUs ref_time, const DsiOptions& opt = {});
Dsi build_dsi(const EventWindow& window, const Trajectory& camera_trajectory, const CameraIntrinsics& k,
              const PoseSE3& reference, const DsiOptions& opt = {});

DsiSummary build_dsi_summary(const EventWindow& window, const Trajectory& camera_trajectory,
                             const CameraIntrinsics& k, TimeUs ref_time, const DsiOptions& opt = {});
DsiSummary build_dsi_summary(const EventWindow& window, const Trajectory& camera_trajectory,
                             const CameraIntrinsics& k, const PoseSE3& reference, const DsiOptions& opt = {});

DsiSummary summarize(const Dsi& dsi);

/// Per-pixel maximum count along depth.
Grid<std::uint32_t> depth_to_confidence(const Dsi& dsi);

/// Half-open pixel rectangle.
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  PixelRect clipped(int w, int h) const;
  PixelRect grown(int by) const { return {x0 - by, y0 - by, x1 + by, y1 + by}; }
};

/// Adaptive Gaussian thresholding on the confidence image followed by a
/// masked median of size G_f over the valid depths. A pixel is valid when its
/// max count exceeds the Gaussian-weighted local mean (G_f x G_f, sigma G_f / 6)
/// by more than C. Caches the local mean per G_f so parameter sweeps are cheap.
class DepthExtractor {
 public:
  /// `roi` limits the output to a sub-rectangle; results inside it match a
  /// full-frame extraction exactly.
  explicit DepthExtractor(const DsiSummary& summary, const PixelRect* roi = nullptr);

  DepthMap extract(double c, int g_f);
  const DsiSummary& summary() const { return *summary_; }

  static void validate(double c, int g_f);

 private:
  const Grid<float>& local_mean(int g_f);

  const DsiSummary* summary_;
  PixelRect roi_;
  PixelRect work_;  // roi grown by the largest filter radius
  Grid<float> confidence_;
  std::map<int, Grid<float>> mean_cache_;
};

DepthMap extract_depth(const DsiSummary& summary, double c, int g_f);
DepthMap extract_depth(const Dsi& dsi, double c, int g_f);

}  // namespace evtac
