#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evtac/depth_map.hpp"
#include "evtac/emvs.hpp"
#include "evtac/events.hpp"
#include "evtac/fusion.hpp"
#include "evtac/geometry.hpp"
#include "evtac/grid.hpp"
#include "evtac/pipeline.hpp"
#include "evtac/surface.hpp"

namespace evtac {

/// Contact patch in pixels.
struct ContactCircle {
  double r = 0.0;
  double x_b = 0.0;
  double y_b = 0.0;
};

/// mm per pixel on the membrane.
struct ScaleFactor {
  double f = 0.0422;
  void validate() const;
};

/// The five calibrated parameters.
struct CalibParams {
  int c = 16;
  int g_f = 45;
  FusionWeights weights;

  void validate() const;
  PipelineParams pipeline(PipelineParams base = {}) const;
  friend bool operator==(const CalibParams& a, const CalibParams& b) {
    return a.c == b.c && a.g_f == b.g_f && a.weights.w_s == b.weights.w_s && a.weights.w_m == b.weights.w_m &&
           a.weights.w_e == b.weights.w_e;
  }
};

/// Sphere-contact ground truth. `indentation_px` is the sphere surface height
/// above the membrane plane in pixel units; `indentation` is the same in mm.
/// Depths along the optical axis are `nominal_depth_mm - indentation`.
struct GroundTruthDepth {
  ContactCircle circle;
  double r_sphere_px = 0.0;
  double z_b = 0.0;  // sphere centre, pixels, negative below the membrane plane
  double f = 0.0;
  double nominal_depth_mm = kNominalMembraneDepthMm;
  Grid<double> indentation_px;
  Grid<double> indentation;
  Grid<std::uint8_t> mask;

  int width() const { return mask.width(); }
  int height() const { return mask.height(); }
  double depth(int x, int y) const { return nominal_depth_mm - indentation(x, y); }
  std::size_t mask_count() const;
  /// |sqrt((x - x_b)^2 + (y - y_b)^2 + (z - z_b)^2) - R| in pixels.
  double sphere_residual(int x, int y) const;
};

struct ContactOptions {
  /// When positive, only pixels indented by more than this (relative to
  /// `nominal_depth_mm`) count as contact.
  double min_indentation_mm = 0.0;
  double nominal_depth_mm = kNominalMembraneDepthMm;
  /// Side of the square closing kernel applied before labelling; 0 disables.
  int close_px = 0;
};

/// Largest 8-connected component of contact pixels, then its minimum
/// enclosing circle. Throws EmptyContactError when nothing qualifies.
ContactCircle detect_contact_circle(const DepthMap& depth, const ContactOptions& opt = {});

/// -sqrt(R_px^2 - r^2). GeometryError when r is outside [0, R_px].
double sphere_center_depth(double r, double r_sphere_px);

GroundTruthDepth sphere_ground_truth(const ContactCircle& circle, double r_sphere_mm, const ScaleFactor& f, int width,
                                     int height, double nominal_depth_mm = kNominalMembraneDepthMm);

enum class MaskMode {
  valid_intersection,  // mean over masked pixels that are valid in Z
  strict,              // missing pixels count as undeformed membrane
};

struct MaeResult {
  double mae_mm = 0.0;
  double coverage = 0.0;  // valid masked pixels / masked pixels
  std::size_t n = 0;      // pixels that entered the mean
};

/// Throws UndefinedMetricError when no pixel enters the mean.
MaeResult masked_mae(const DepthMap& z, const GroundTruthDepth& gt, MaskMode mode = MaskMode::valid_intersection);

/// Parameter grid. Weights are every (i, j, k) / simplex_steps with
/// i + j + k = simplex_steps, ordered lexicographically by (w_s, w_m, w_e).
struct CalibGrid {
  std::vector<int> c_values;
  std::vector<int> g_f_values;
  int simplex_steps = 18;

  /// C in 5..20, G_f odd in 11..91, step 1/18.
  static CalibGrid full();
  void validate() const;
  std::vector<FusionWeights> weights() const;
  std::size_t size() const { return c_values.size() * g_f_values.size() * weights().size(); }
  std::string describe() const;
};

/// One calibration object: a scan window and the ground truth in its t_m frame.
struct CalibrationTarget {
  std::span<const Event> events;  // time-sorted
  const Trajectory* trajectory = nullptr;
  CameraIntrinsics intrinsics;
  TimeUs t_s = 0;
  GroundTruthDepth gt;
};

struct CalibOptions {
  DsiOptions dsi;
  TimeUs window_us = kDefaultWindowUs;
  MaskMode mask_mode = MaskMode::valid_intersection;
  bool record_all = false;  // keep every evaluated point for auditing
  int threads = 0;
};

struct GridPoint {
  CalibParams params;
  double mae_mm = 0.0;
  double coverage = 0.0;
};

struct CalibResult {
  CalibParams params;
  double mae_mm = 0.0;
  double coverage = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  std::vector<std::string> skip_log;
  std::vector<GridPoint> points;  // filled when record_all
};

/// True when `a` should win over `b` at equal MAE: smaller C, then smaller G_f,
/// then lexicographically smaller (w_s, w_m, w_e).
bool tie_break_less(const CalibParams& a, const CalibParams& b);

/// Exhaustive search minimising the masked MAE of the fused map, averaged over
/// the targets. Points where the metric is undefined are skipped and logged.
/// The result does not depend on the thread count.
CalibResult grid_search(std::span<const CalibrationTarget> targets, const CalibGrid& grid,
                        const CalibOptions& opt = {});

/// Runs the full pipeline for one parameter set on one target.
MaeResult evaluate_params(const CalibrationTarget& target, const CalibParams& params, const CalibOptions& opt = {});

struct CrossValidation {
  std::vector<double> e;  // e_i: mean masked MAE of candidate i over all objects
  std::size_t best = 0;
};

CrossValidation cross_validate(std::span<const CalibrationTarget> objects, std::span<const CalibParams> candidates,
                               const CalibOptions& opt = {});

}  // namespace evtac
