#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evtac/braille.hpp"
#include "evtac/calibration.hpp"
#include "evtac/config.hpp"
#include "evtac/errors.hpp"
#include "evtac/events.hpp"
#include "evtac/image_io.hpp"
#include "evtac/parallel.hpp"
#include "evtac/pipeline.hpp"
#include "evtac/simulator.hpp"
#include "evtac/stitch.hpp"

namespace evtac::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void warn(const std::string& msg) { std::fprintf(stderr, "warning: %s\n", msg.c_str()); }

void write_json(const fs::path& path, const json& j) {
  if (path.empty() || path == "-") {
    std::printf("%s\n", j.dump(2).c_str());
    return;
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
}

EventStream load_events(const fs::path& path, EventFileInfo* info = nullptr) {
  if (!fs::exists(path)) throw ConfigError("file does not exist", path.string());
  if (path.extension() == ".csv") return read_events_csv(path);
  return read_events_binary(path, info);
}

// Shared inputs of the commands that consume a recorded scan.
struct ScanInputs {
  std::string events;
  std::string poses;
  std::string camera;
  bool poses_are_end_effector = false;

  void add_to(CLI::App* sub, bool events_required = true) {
    auto* ev = sub->add_option("--events,--scan", events, "Event file (.bin or .csv)");
    if (events_required) ev->required();
    sub->add_option("--poses", poses, "Pose CSV (t_us,x_mm,y_mm,z_mm,qx,qy,qz,qw)")->required();
    sub->add_option("--camera", camera, "Camera JSON (intrinsics, hand_eye)");
    sub->add_flag("--end-effector-poses", poses_are_end_effector,
                  "Poses are robot end-effector poses; compose with the hand-eye transform");
  }

  CameraConfig camera_config() const {
    return camera.empty() ? CameraConfig{} : load_camera_config(camera);
  }

  Trajectory trajectory(const CameraConfig& cam) const {
    if (!fs::exists(poses)) throw ConfigError("file does not exist", poses);
    Trajectory t = read_pose_csv(poses);
    return poses_are_end_effector ? t.compose_right(cam.hand_eye) : t;
  }
};

PipelineParams params_from_calib(const std::string& calib_path, PipelineParams base) {
  if (calib_path.empty() || !fs::exists(calib_path)) {
    warn(calib_path.empty() ? "no calibration given; using default parameters (C=16, G_f=45, w=0.445/0.333/0.222)"
                            : "calibration file " + calib_path + " not found; using default parameters");
    return base;
  }
  return load_calibration(calib_path).params.pipeline(base);
}

json params_json(const PipelineParams& p) {
  return {{"c", p.c},
          {"g_f", p.g_f},
          {"w_s", p.weights.w_s},
          {"w_m", p.weights.w_m},
          {"w_e", p.weights.w_e},
          {"method", to_string(p.method)},
          {"window_us", p.window_us},
          {"z_min_mm", p.dsi.planes.z_min},
          {"z_max_mm", p.dsi.planes.z_max},
          {"n_z", p.dsi.planes.count},
          {"threads", resolve_threads(p.dsi.threads)}};
}

json metrics_json(const SurfaceMetrics& m) {
  json regions = json::array();
  for (const RegionStats& r : m.regions) {
    regions.push_back({{"region", r.region},
                       {"n_points", r.n_points},
                       {"mean_depth_mm", r.mean_depth_mm},
                       {"std_depth_mm", r.std_depth_mm},
                       {"mae_mm", r.mae_mm}});
  }
  return {{"mae_mm", m.mae_mm},
          {"rmse_mm", m.rmse_mm},
          {"std_mm", m.std_mm},
          {"n_points", m.n_points},
          {"regions", regions}};
}

// Reconstruction options shared by reconstruct, stitch and bench.
struct PipelineFlags {
  std::string calib;
  std::string method = "bma";
  TimeUs window_us = kDefaultWindowUs;
  double z_min = 40.0, z_max = 50.0;
  int n_z = 64;
  int threads = 0;

  void add_to(CLI::App* sub) {
    sub->add_option("--calib", calib, "Calibration JSON (defaults used when absent)");
    sub->add_option("--method", method, "Fusion path")->check(CLI::IsMember({"emvs", "lr", "bma"}));
    sub->add_option("--window-us", window_us, "Window length in microseconds");
    sub->add_option("--z-min-mm", z_min, "Nearest depth plane");
    sub->add_option("--z-max-mm", z_max, "Farthest depth plane");
    sub->add_option("--n-z", n_z, "Number of depth planes");
    sub->add_option("--threads", threads, "Worker threads (0: EVTAC_THREADS or 1)");
  }

  PipelineParams resolve() const {
    PipelineParams base;
    base.method = parse_fusion_method(method);
    base.window_us = window_us;
    base.dsi.planes = {z_min, z_max, n_z};
    base.dsi.threads = threads;
    PipelineParams p = params_from_calib(calib, base);
    p.validate();
    return p;
  }
};

std::vector<WindowReconstruction> reconstruct_all(const EventStream& events, const Trajectory& traj,
                                                  const CameraIntrinsics& k, const PipelineParams& p,
                                                  std::size_t max_windows, std::size_t& skipped) {
  std::vector<WindowReconstruction> out;
  skipped = 0;
  for (TimeUs ts : window_starts(traj, p.window_us)) {
    if (max_windows && out.size() >= max_windows) break;
    WindowReconstruction r = reconstruct_window(events, traj, k, ts, p);
    if (r.fused.valid_count() == 0) {
      ++skipped;
      continue;
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

void register_simulate(CLI::App& app, int&) {
  struct Opts {
    std::string surface, scan, out_dir = "sim";
    std::optional<double> v, length, x_start, c_sim, noise;
    std::optional<std::uint64_t> seed;
    int threads = 0;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("simulate", "Render a synthetic scan: events, poses, ground truth");
  sub->add_option("--surface", o->surface, "Surface JSON")->required();
  sub->add_option("--scan", o->scan, "Scan JSON (defaults when absent)");
  sub->add_option("--out-dir", o->out_dir, "Output directory");
  sub->add_option("--v-mm-s", o->v, "Roller speed override");
  sub->add_option("--length-mm", o->length, "Scan length override");
  sub->add_option("--x-start-mm", o->x_start, "Start position override");
  sub->add_option("--c-sim", o->c_sim, "Contrast threshold override");
  sub->add_option("--noise-hz", o->noise, "Background event rate per pixel override");
  sub->add_option("--seed", o->seed, "Noise seed override");
  sub->add_option("--threads", o->threads, "Worker threads");
  sub->callback([o] {
    const SurfaceModel surface = parse_surface(read_text_file(o->surface));
    ScanConfig cfg = o->scan.empty() ? ScanConfig{} : parse_scan_config(read_text_file(o->scan));
    if (o->v) cfg.v_mm_s = *o->v;
    if (o->length) cfg.scan_length_mm = *o->length;
    if (o->x_start) cfg.x_start_mm = *o->x_start;
    if (o->c_sim) cfg.c_sim = *o->c_sim;
    if (o->noise) cfg.noise_rate_hz = *o->noise;
    if (o->seed) cfg.seed = *o->seed;
    cfg.threads = o->threads;
    cfg.validate();
    const auto t0 = Clock::now();
    const SimulatedScan scan = simulate_scan(surface, cfg);
    const double sim_ms = ms_since(t0);
    const fs::path dir = o->out_dir;
    fs::create_directories(dir);
    write_events_binary(dir / "events.bin", scan.events, {cfg.intrinsics.width, cfg.intrinsics.height});
    write_pose_csv(dir / "poses.csv", scan.trajectory);
    {
      std::ofstream(dir / "surface.json") << surface_json(surface) << "\n";
      std::ofstream(dir / "scan.json") << scan_config_json(cfg) << "\n";
      std::ofstream(dir / "camera.json") << camera_config_json({cfg.intrinsics, PoseSE3{}}) << "\n";
    }
    if (!scan.trajectory.empty()) {
      const PoseSE3 mid = scan.trajectory.at((scan.trajectory.begin_time() + scan.trajectory.end_time()) / 2);
      write_depth_map(dir / "gt_depth_mid", ground_truth_depth(surface, mid, cfg.intrinsics, cfg.threads));
    }
    write_json(dir / "report.json", {{"command", "simulate"},
                                     {"version", EVTAC_VERSION},
                                     {"events", scan.events.size()},
                                     {"duration_us", cfg.duration_us()},
                                     {"simulate_ms", sim_ms},
                                     {"scan", json::parse(scan_config_json(cfg))},
                                     {"surface", json::parse(surface_json(surface))}});
    std::printf("%zu events -> %s\n", scan.events.size(), (dir / "events.bin").string().c_str());
  });
}

void register_reconstruct(CLI::App& app, int& exit_code) {
  struct Opts {
    ScanInputs in;
    PipelineFlags pipe;
    std::string out_dir = "recon", surface;
    std::size_t max_windows = 0;
    bool save_maps = true, use_icp = true;
    std::optional<double> threshold;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("reconstruct", "Per-window depth maps, fusion and the stitched cloud");
  o->in.add_to(sub);
  o->pipe.add_to(sub);
  sub->add_option("--out-dir", o->out_dir, "Output directory");
  sub->add_option("--surface", o->surface, "Ground-truth surface JSON for metrics");
  sub->add_option("--max-windows", o->max_windows, "Stop after this many windows (0: all)");
  sub->add_flag("!--no-maps", o->save_maps, "Skip writing per-window PFM maps");
  sub->add_flag("!--no-icp", o->use_icp, "Stitch with the kinematic prior only");
  sub->add_option("--threshold-mm", o->threshold, "Exit with code 4 when the surface MAE exceeds this");
  sub->callback([o, &exit_code] {
    const PipelineParams p = o->pipe.resolve();
    const CameraConfig cam = o->in.camera_config();
    const Trajectory traj = o->in.trajectory(cam);
    const EventStream events = load_events(o->in.events);
    const CameraIntrinsics& k = cam.intrinsics;
    const fs::path dir = o->out_dir;
    fs::create_directories(dir);

    const auto t0 = Clock::now();
    std::size_t skipped = 0;
    const auto windows = reconstruct_all(events, traj, k, p, o->max_windows, skipped);
    const double recon_ms = ms_since(t0);
    json per_window = json::array();
    std::vector<DepthMap> fused;
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const WindowReconstruction& r = windows[i];
      char stem[64];
      std::snprintf(stem, sizeof stem, "window_%04zu", i);
      if (o->save_maps) {
        static constexpr const char* kNames[3] = {"zs", "zm", "ze"};
        for (int j = 0; j < 3; ++j) {
          if (r.own[static_cast<std::size_t>(j)]) {
            write_depth_map(dir / (std::string(stem) + "_" + kNames[j]), *r.own[static_cast<std::size_t>(j)]);
          }
        }
        write_depth_map(dir / (std::string(stem) + "_zf"), r.fused);
      }
      per_window.push_back({{"t_s", r.poses.t_s},
                            {"events", r.n_events},
                            {"coverage", r.fused.coverage()},
                            {"dsi_ms", r.dsi_ms},
                            {"extract_ms", r.extract_ms},
                            {"fuse_ms", r.fuse_ms}});
      fused.push_back(r.fused);
    }
    json report = {{"command", "reconstruct"},
                   {"version", EVTAC_VERSION},
                   {"config", params_json(p)},
                   {"events", events.size()},
                   {"windows", per_window},
                   {"windows_skipped", skipped},
                   {"reconstruct_ms", recon_ms}};
    if (!fused.empty()) {
      StitchOptions so;
      so.use_icp = o->use_icp;
      so.threads = p.dsi.threads;
      const auto t1 = Clock::now();
      const StitchResult st = assemble(fused, k, so);
      report["stitch_ms"] = ms_since(t1);
      write_ply(dir / "cloud.ply", st.cloud);
      report["cloud_points"] = st.cloud.size();
      if (!o->surface.empty()) {
        const SurfaceModel gt = parse_surface(read_text_file(o->surface));
        const SurfaceMetrics m = evaluate_surface(st.cloud, gt);
        report["metrics"] = metrics_json(m);
        if (o->threshold && m.mae_mm > *o->threshold) exit_code = kExitMetric;
      }
    } else {
      warn("no window produced a valid depth pixel");
    }
    write_json(dir / "report.json", report);
    std::printf("%zu windows -> %s\n", windows.size(), dir.string().c_str());
  });
}

void register_calibrate(CLI::App& app, int&) {
  struct Opts {
    ScanInputs in;
    std::string out = "calib.json", surface, grid = "full";
    bool strict_mask = false;
    double sphere_radius_mm = 4.0, scale_f = 0.0422;
    std::optional<TimeUs> t_s;
    TimeUs window_us = kDefaultWindowUs;
    int threads = 0;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("calibrate", "Grid search of (C, G_f, weights) on a sphere press");
  o->in.add_to(sub);
  sub->add_option("--sphere-radius-mm", o->sphere_radius_mm, "Calibration sphere radius");
  sub->add_option("--scale-f", o->scale_f, "Membrane scale, mm per pixel");
  sub->add_option("--surface", o->surface,
                  "Surface JSON of a simulated scan; the contact circle then comes from its ground truth");
  sub->add_option("--t-s", o->t_s, "Window start (default: centred in the scan)");
  sub->add_option("--window-us", o->window_us, "Window length");
  sub->add_option("--grid", o->grid, "full or reduced (3 x 3 x step 1/6)")->check(CLI::IsMember({"full", "reduced"}));
  sub->add_flag("--strict-mask", o->strict_mask, "Count masked pixels without depth as undeformed membrane");
  sub->add_option("--out", o->out, "Calibration JSON");
  sub->add_option("--threads", o->threads, "Worker threads");
  sub->callback([o] {
    const CameraConfig cam = o->in.camera_config();
    const Trajectory traj = o->in.trajectory(cam);
    const EventStream events = load_events(o->in.events);
    const CameraIntrinsics& k = cam.intrinsics;
    if (traj.empty()) throw DataError("empty pose file");
    const TimeUs t_s = o->t_s ? *o->t_s : (traj.begin_time() + traj.end_time()) / 2 - o->window_us / 2;
    if (!traj.covers(t_s, t_s + o->window_us)) throw ConfigError("window outside the trajectory", "t_s");
    const WindowPoses poses = window_poses(traj, t_s, o->window_us);

    ContactCircle circle;
    if (!o->surface.empty()) {
      const SurfaceModel surface = parse_surface(read_text_file(o->surface));
      ContactOptions co;
      co.min_indentation_mm = 1e-9;
      co.nominal_depth_mm = surface.plate_depth();
      circle = detect_contact_circle(ground_truth_depth(surface, poses.pose[1], k, o->threads), co);
    } else {
      PipelineParams p;
      p.window_us = o->window_us;
      p.dsi.threads = o->threads;
      const WindowReconstruction r = reconstruct_window(events, traj, k, t_s, p);
      ContactOptions co;
      co.min_indentation_mm = 0.05;
      co.close_px = 5;
      circle = detect_contact_circle(r.fused, co);
    }
    CalibrationTarget target{events, &traj, k, t_s,
                             sphere_ground_truth(circle, o->sphere_radius_mm, ScaleFactor{o->scale_f}, k.width,
                                                 k.height)};
    CalibGrid grid = CalibGrid::full();
    if (o->grid == "reduced") grid = {{5, 12, 20}, {11, 45, 91}, 6};
    CalibOptions copt;
    copt.window_us = o->window_us;
    copt.mask_mode = o->strict_mask ? MaskMode::strict : MaskMode::valid_intersection;
    copt.threads = o->threads;
    const auto t0 = Clock::now();
    const CalibResult res = grid_search(std::span(&target, 1), grid, copt);
    const double ms = ms_since(t0);
    for (const std::string& s : res.skip_log) warn(s);
    save_calibration(o->out, {res.params, res.mae_mm, res.coverage, grid.describe(), utc_timestamp()});
    std::printf("C=%d G_f=%d w=(%.4f, %.4f, %.4f) MAE=%.4f mm coverage=%.3f; %zu points in %.1f s -> %s\n",
                res.params.c, res.params.g_f, res.params.weights.w_s, res.params.weights.w_m,
                res.params.weights.w_e, res.mae_mm, res.coverage, res.evaluated, ms / 1000.0, o->out.c_str());
  });
}

void register_stitch(CLI::App& app, int& exit_code) {
  struct Opts {
    ScanInputs in;
    PipelineFlags pipe;
    std::string out = "cloud.ply", surface, metrics;
    double voxel_mm = 0.05, max_corr_mm = 1.0;
    bool use_icp = true;
    std::optional<double> threshold;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("stitch", "Assemble a large surface from consecutive windows");
  o->in.add_to(sub);
  o->pipe.add_to(sub);
  sub->add_option("--out", o->out, "PLY output");
  sub->add_option("--voxel-mm", o->voxel_mm, "Voxel size for downsampling (<= 0 disables)");
  sub->add_option("--max-corr-mm", o->max_corr_mm, "ICP correspondence gate");
  sub->add_flag("!--no-icp", o->use_icp, "Use the kinematic prior only");
  sub->add_option("--surface", o->surface, "Ground-truth surface JSON for metrics");
  sub->add_option("--metrics", o->metrics, "Metrics JSON output (stdout when omitted)");
  sub->add_option("--threshold-mm", o->threshold, "Exit with code 4 when the MAE exceeds this");
  sub->callback([o, &exit_code] {
    const PipelineParams p = o->pipe.resolve();
    const CameraConfig cam = o->in.camera_config();
    const Trajectory traj = o->in.trajectory(cam);
    const EventStream events = load_events(o->in.events);
    std::size_t skipped = 0;
    const auto windows = reconstruct_all(events, traj, cam.intrinsics, p, 0, skipped);
    if (windows.empty()) throw UndefinedMetricError("no window produced a valid depth pixel");
    std::vector<DepthMap> maps;
    for (const auto& w : windows) maps.push_back(w.fused);
    StitchOptions so;
    so.use_icp = o->use_icp;
    so.voxel_mm = o->voxel_mm;
    so.icp.max_correspondence_mm = o->max_corr_mm;
    so.threads = p.dsi.threads;
    const StitchResult st = assemble(maps, cam.intrinsics, so);
    write_ply(o->out, st.cloud);
    json alignments = json::array();
    for (const AlignmentResult& a : st.alignments) {
      alignments.push_back({{"rms_mm", a.rms_mm},
                            {"iterations", a.iterations},
                            {"converged", a.converged},
                            {"correspondences", a.correspondences}});
    }
    json report = {{"command", "stitch"},
                   {"version", EVTAC_VERSION},
                   {"config", params_json(p)},
                   {"windows", maps.size()},
                   {"windows_skipped", skipped},
                   {"points", st.cloud.size()},
                   {"alignments", alignments}};
    if (!o->surface.empty()) {
      const SurfaceMetrics m = evaluate_surface(st.cloud, parse_surface(read_text_file(o->surface)));
      report["metrics"] = metrics_json(m);
      if (o->threshold && m.mae_mm > *o->threshold) exit_code = kExitMetric;
    }
    write_json(o->metrics, report);
  });
}

void register_braille(CLI::App& app, int&) {
  struct Opts {
    std::string events, out, camera;
    double v_mm_s = 500.0, pitch_mm = 7.2, z_mm = kNominalMembraneDepthMm;
    std::size_t batch = 20'000;
    int threads = 0;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("braille", "Read a Braille plate from a rolling scan");
  sub->add_option("--events", o->events, "Event file")->required();
  sub->add_option("--v-mm-s", o->v_mm_s, "Roller speed");
  sub->add_option("--pitch-mm", o->pitch_mm, "Cell pitch");
  sub->add_option("--z-mm", o->z_mm, "Membrane depth");
  sub->add_option("--batch", o->batch, "Events per IWE frame");
  sub->add_option("--camera", o->camera, "Camera JSON");
  sub->add_option("--out", o->out, "Result JSON (stdout when omitted)");
  sub->add_option("--threads", o->threads, "Worker threads");
  sub->callback([o] {
    const CameraConfig cam = o->camera.empty() ? CameraConfig{} : load_camera_config(o->camera);
    const EventStream events = load_events(o->events);
    braille::ReadOptions ro;
    ro.batch_events = o->batch;
    ro.f_px = cam.intrinsics.fx;
    ro.z_mm = o->z_mm;
    ro.sensor_width = cam.intrinsics.width;
    ro.sensor_height = cam.intrinsics.height;
    ro.plate.cell_pitch_mm = o->pitch_mm;
    ro.threads = o->threads;
    const auto t0 = Clock::now();
    const braille::PlateReading r = braille::read_plate(events, o->v_mm_s, ro);
    json cells = json::array();
    for (const auto& c : r.cells) {
      cells.push_back({{"pattern", c.pattern.to_string()},
                       {"char", std::string(1, c.character)},
                       {"confidence", c.confidence}});
    }
    write_json(o->out, {{"text", r.text},
                        {"per_cell", cells},
                        {"wpm", braille::wpm_metric(o->v_mm_s, o->pitch_mm)},
                        {"frames", r.frames},
                        {"read_ms", ms_since(t0)}});
  });
}

void register_bench(CLI::App& app, int&) {
  struct Opts {
    ScanInputs in;
    PipelineFlags pipe;
    std::optional<TimeUs> t_s;
    int repeats = 5;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("bench", "Window latency and DSI voting throughput");
  o->in.add_to(sub, false);
  o->pipe.add_to(sub);
  sub->add_option("--t-s", o->t_s, "Window start (default: first window)");
  sub->add_option("--repeats", o->repeats, "Timed repetitions")->check(CLI::PositiveNumber);
  sub->add_option("--out", o->out, "Report JSON (stdout when omitted)");
  sub->callback([o] {
    PipelineParams p = o->pipe.resolve();
    const CameraConfig cam = o->in.camera_config();
    const Trajectory traj = o->in.trajectory(cam);
    const EventStream events = o->in.events.empty() ? EventStream{} : load_events(o->in.events);
    const auto starts = window_starts(traj, p.window_us);
    if (starts.empty() && !o->t_s) throw ConfigError("trajectory shorter than one window", "poses");
    const TimeUs t_s = o->t_s ? *o->t_s : starts.front();
    std::vector<double> dsi_ms, total_ms;
    std::size_t n_events = 0;
    for (int i = 0; i < o->repeats; ++i) {
      const auto t0 = Clock::now();
      const WindowSummaries s = build_window_summaries(events, traj, cam.intrinsics, t_s, p);
      const double d = ms_since(t0);
      const WindowReconstruction r = fuse_window(s, cam.intrinsics, p);
      total_ms.push_back(ms_since(t0));
      dsi_ms.push_back(d);
      n_events = s.n_events;
      (void)r;
    }
    std::sort(dsi_ms.begin(), dsi_ms.end());
    std::sort(total_ms.begin(), total_ms.end());
    const double best_dsi = dsi_ms.front();
    const int summaries = p.method == FusionMethod::emvs ? 1 : 3;
    write_json(o->out, {{"command", "bench"},
                        {"version", EVTAC_VERSION},
                        {"config", params_json(p)},
                        {"window_events", n_events},
                        {"dsi_ms_min", best_dsi},
                        {"window_ms_min", total_ms.front()},
                        {"window_ms_median", total_ms[total_ms.size() / 2]},
                        {"dsi_events_per_s", best_dsi > 0.0 ? summaries * n_events / (best_dsi / 1000.0) : 0.0}});
  });
}

void register_eval(CLI::App& app, int& exit_code) {
  struct Opts {
    std::string cloud, surface, out;
    std::optional<double> threshold;
  };
  auto o = std::make_shared<Opts>();
  CLI::App* sub = app.add_subcommand("eval", "Compare a point cloud with a ground-truth surface");
  sub->add_option("--cloud", o->cloud, "PLY cloud")->required();
  sub->add_option("--surface", o->surface, "Surface JSON")->required();
  sub->add_option("--out", o->out, "Metrics JSON (stdout when omitted)");
  sub->add_option("--threshold-mm", o->threshold, "Exit with code 4 when the MAE exceeds this");
  sub->callback([o, &exit_code] {
    if (!fs::exists(o->cloud)) throw ConfigError("file does not exist", o->cloud);
    const SurfaceMetrics m = evaluate_surface(read_ply(o->cloud), parse_surface(read_text_file(o->surface)));
    write_json(o->out, metrics_json(m));
    if (o->threshold && m.mae_mm > *o->threshold) exit_code = kExitMetric;
  });
}

}  // namespace evtac::cli
