#pragma once

#include <cstdint>

#include "evtac/depth_map.hpp"
#include "evtac/events.hpp"
#include "evtac/geometry.hpp"
#include "evtac/grid.hpp"
#include "evtac/surface.hpp"

namespace evtac {

/// Edge-emphasising shading proxy: L = log(I0 + gain * |grad depth|), where the
/// gradient is taken by central differences on the depth image (mm per pixel).
struct ShadingModel {
  double i0 = 1.0;
  double gain = 40.0;
};

struct ScanConfig {
  CameraIntrinsics intrinsics;
  double v_mm_s = 300.0;          // roller speed along +X
  double x_start_mm = 0.0;        // camera X at t = 0
  double y_mm = 0.0;              // lateral camera offset
  double scan_length_mm = 12.0;   // duration = length / v
  TimeUs static_duration_us = 20'000;  // used when v == 0
  double c_sim = 0.25;            // contrast threshold, log units
  double noise_rate_hz = 0.0;     // background events per pixel per second
  double sample_rate_hz = 10'000.0;
  double pose_rate_hz = 1'000.0;
  std::uint64_t seed = 1;
  ShadingModel shading;
  int threads = 0;  // <= 0: default_thread_count()

  void validate() const;
  TimeUs duration_us() const;
};

/// Camera poses (B_T_C) for a constant-velocity pass along +X over the plate.
/// The camera looks along +Z with identity rotation.
Trajectory make_scan_trajectory(const ScanConfig& cfg);

/// Depth of the indented membrane along every pixel ray; pixels that miss the
/// object carry the nominal plate depth. Works for arbitrary poses.
DepthMap ground_truth_depth(const SurfaceModel& surface, const PoseSE3& camera_pose, const CameraIntrinsics& k,
                            int threads = 0);

/// Shading proxy evaluated on the ground-truth depth image.
Grid<double> render_log_intensity(const SurfaceModel& surface, const PoseSE3& camera_pose, const CameraIntrinsics& k,
                                  const ShadingModel& shading = {}, int threads = 0);
Grid<double> log_intensity_from_depth(const Grid<double>& depth, const ShadingModel& shading);

/// Depth image rendered with the row-table rasteriser used by generate_events
/// for purely translating cameras with identity rotation at (cam_x, cam_y, cam_z).
Grid<double> render_depth_translating(const SurfaceModel& surface, const CameraIntrinsics& k, double cam_x,
                                      double cam_y, double cam_z = 0.0);

/// Integrate-and-fire over L sampled at cfg.sample_rate_hz between the
/// trajectory end points. A pixel fires when |L - L_ref| >= C; the event time is
/// interpolated linearly to the crossing and L_ref is reset to L. Output is
/// sorted by event_before and does not depend on the thread count.
EventStream generate_events(const SurfaceModel& surface, const ScanConfig& cfg, const Trajectory& camera_trajectory);

struct SimulatedScan {
  Trajectory trajectory;
  EventStream events;
};

SimulatedScan simulate_scan(const SurfaceModel& surface, const ScanConfig& cfg);

}  // namespace evtac
