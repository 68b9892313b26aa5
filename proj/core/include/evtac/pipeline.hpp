#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evtac/depth_map.hpp"
#include "evtac/emvs.hpp"
#include "evtac/events.hpp"
#include "evtac/fusion.hpp"
#include "evtac/geometry.hpp"

namespace evtac {

enum class FusionMethod { emvs, left_right, bma };

FusionMethod parse_fusion_method(const std::string& name);  // "emvs" | "lr" | "bma"
std::string to_string(FusionMethod m);

/// Extraction and fusion parameters; defaults are the calibrated optimum of
/// the reference hardware (C = 16, G_f = 45, weights 0.445/0.333/0.222).
struct PipelineParams {
  double c = 16.0;
  int g_f = 45;
  FusionWeights weights;
  DsiOptions dsi;
  TimeUs window_us = kDefaultWindowUs;
  FusionMethod method = FusionMethod::bma;

  void validate() const;
};

/// Reference poses of one window: start, midpoint, end.
struct WindowPoses {
  TimeUs t_s = 0, t_m = 0, t_e = 0;
  std::array<PoseSE3, 3> pose;  // s, m, e
};

WindowPoses window_poses(const Trajectory& camera_trajectory, TimeUs t_s, TimeUs window_us);

/// Non-overlapping windows [t, t + window_us] that fit inside the trajectory.
std::vector<TimeUs> window_starts(const Trajectory& camera_trajectory, TimeUs window_us);

struct WindowSummaries {
  WindowPoses poses;
  std::array<std::optional<DsiSummary>, 3> dsi;  // s, m, e; absent when the method skips it
  std::size_t n_events = 0;
};

WindowSummaries build_window_summaries(std::span<const Event> sorted_events, const Trajectory& camera_trajectory,
                                       const CameraIntrinsics& k, TimeUs t_s, const PipelineParams& params);

struct WindowReconstruction {
  WindowPoses poses;
  std::size_t n_events = 0;
  std::array<std::optional<DepthMap>, 3> own;     // Z_s, Z_m, Z_e in their own frames
  std::array<std::optional<WarpedDepthMap>, 3> warped;  // W_i(Z_i) in frame m
  DepthMap fused;                                  // frame m
  double dsi_ms = 0.0, extract_ms = 0.0, fuse_ms = 0.0;
};

/// Extract the per-reference depth maps, warp them to t_m and fuse with the
/// configured method.
WindowReconstruction fuse_window(const WindowSummaries& s, const CameraIntrinsics& k, const PipelineParams& params);

WindowReconstruction reconstruct_window(std::span<const Event> sorted_events, const Trajectory& camera_trajectory,
                                        const CameraIntrinsics& k, TimeUs t_s, const PipelineParams& params);

}  // namespace evtac
