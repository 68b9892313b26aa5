#include "evtac/pipeline.hpp"

#include <chrono>

#include "evtac/errors.hpp"

namespace evtac {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::array<bool, 3> needed(FusionMethod m) {
  switch (m) {
    case FusionMethod::emvs:
      return {false, true, false};
    case FusionMethod::left_right:
      return {true, false, true};
    case FusionMethod::bma:
      break;
  }
  return {true, true, true};
}

}  // namespace

FusionMethod parse_fusion_method(const std::string& name) {
  if (name == "emvs") return FusionMethod::emvs;
  if (name == "lr" || name == "left_right") return FusionMethod::left_right;
  if (name == "bma") return FusionMethod::bma;
  throw ConfigError("unknown fusion method '" + name + "' (expected emvs, lr or bma)", "method");
}

std::string to_string(FusionMethod m) {
  switch (m) {
    case FusionMethod::emvs:
      return "emvs";
    case FusionMethod::left_right:
      return "lr";
    case FusionMethod::bma:
      break;
  }
  return "bma";
}

void PipelineParams::validate() const {
  DepthExtractor::validate(c, g_f);
  weights.validate();
  dsi.planes.validate();
  if (window_us <= 0) throw ConfigError("window length must be positive", "window_us");
}

WindowPoses window_poses(const Trajectory& traj, TimeUs t_s, TimeUs window_us) {
  WindowPoses p;
  p.t_s = t_s;
  p.t_e = t_s + window_us;
  p.t_m = t_s + window_us / 2;
  if (!traj.covers(p.t_s, p.t_e)) throw OutOfRangeError("window exceeds the trajectory span");
  p.pose = {traj.at(p.t_s), traj.at(p.t_m), traj.at(p.t_e)};
  return p;
}

std::vector<TimeUs> window_starts(const Trajectory& traj, TimeUs window_us) {
  if (window_us <= 0) throw ConfigError("window length must be positive", "window_us");
  std::vector<TimeUs> out;
  if (traj.empty()) return out;
  for (TimeUs t = traj.begin_time(); t + window_us <= traj.end_time(); t += window_us) out.push_back(t);
  return out;
}

WindowSummaries build_window_summaries(std::span<const Event> sorted, const Trajectory& traj,
                                       const CameraIntrinsics& k, TimeUs t_s, const PipelineParams& params) {
  WindowSummaries s;
  s.poses = window_poses(traj, t_s, params.window_us);
  const EventWindow win = make_window(sorted, t_s, params.window_us);
  s.n_events = win.events.size();
  const auto need = needed(params.method);
  for (int i = 0; i < 3; ++i) {
    if (need[i]) s.dsi[i] = build_dsi_summary(win, traj, k, s.poses.pose[i], params.dsi);
  }
  return s;
}

WindowReconstruction fuse_window(const WindowSummaries& s, const CameraIntrinsics& k, const PipelineParams& params) {
  params.validate();
  WindowReconstruction r;
  r.poses = s.poses;
  r.n_events = s.n_events;
  const auto need = needed(params.method);

  auto t0 = Clock::now();
  for (int i = 0; i < 3; ++i) {
    if (!need[i]) continue;
    if (!s.dsi[i]) throw ConfigError("window summary lacks a reference required by " + to_string(params.method));
    DepthMap z = extract_depth(*s.dsi[i], params.c, params.g_f);
    z.t_start = s.poses.t_s;
    z.t_end = s.poses.t_e;
    r.own[i] = std::move(z);
  }
  r.extract_ms = ms_since(t0);

  t0 = Clock::now();
  const PoseSE3& t_m = s.poses.pose[1];
  for (int i = 0; i < 3; ++i) {
    if (!r.own[i]) continue;
    if (i == 1) {
      r.warped[i] = WarpedDepthMap{*r.own[i], s.poses.t_m, 0};
    } else {
      r.warped[i] = warp_depth(*r.own[i], s.poses.pose[i], t_m, k);
    }
  }
  switch (params.method) {
    case FusionMethod::emvs:
      r.fused = r.warped[1]->map;
      break;
    case FusionMethod::left_right:
      r.fused = fuse_left_right(*r.warped[0], *r.warped[2]);
      break;
    case FusionMethod::bma:
      r.fused = fuse_bma(*r.warped[0], *r.warped[1], *r.warped[2], params.weights);
      break;
  }
  r.fused.reference = t_m;
  r.fused.t_start = s.poses.t_s;
  r.fused.t_end = s.poses.t_e;
  r.fuse_ms = ms_since(t0);
  return r;
}

WindowReconstruction reconstruct_window(std::span<const Event> sorted, const Trajectory& traj,
                                        const CameraIntrinsics& k, TimeUs t_s, const PipelineParams& params) {
  params.validate();
  const auto t0 = Clock::now();
  const WindowSummaries s = build_window_summaries(sorted, traj, k, t_s, params);
  const double dsi_ms = ms_since(t0);
  WindowReconstruction r = fuse_window(s, k, params);
  r.dsi_ms = dsi_ms;
  return r;
}

}  // namespace evtac
