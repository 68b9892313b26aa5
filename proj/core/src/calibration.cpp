#include "evtac/calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include <opencv2/imgproc.hpp>

#include "evtac/errors.hpp"
#include "evtac/parallel.hpp"

namespace evtac {
namespace {

constexpr int kMinC = 5, kMaxC = 20;
constexpr int kMinGf = 11, kMaxGf = 91;

// Everything about a target that does not depend on the parameters.
struct TargetCache {
  const CalibrationTarget* target = nullptr;
  WindowPoses poses;
  std::array<DsiSummary, 3> dsi;
  std::array<PixelRect, 3> roi;
  std::vector<std::size_t> mask_index;  // row-major order
  std::vector<double> gt_depth;
  std::vector<double> gt_indentation;
};

// Warped depth of each reference at every masked pixel.
struct Samples {
  std::array<std::vector<double>, 3> depth;
  std::array<std::vector<std::uint8_t>, 3> valid;
};

// Pixels of frame i that can splat into `box` of frame m for any depth plane.
PixelRect source_rect(const PixelRect& box, const PoseSE3& t_m, const PoseSE3& t_i, const CameraIntrinsics& k,
                      const DepthPlanes& planes) {
  const PoseSE3 i_t_m = relative_pose(t_i, t_m);
  double u0 = std::numeric_limits<double>::infinity(), v0 = u0, u1 = -u0, v1 = -u0;
  for (double z : {planes.z_min, planes.z_max}) {
    for (int cx : {box.x0, box.x1 - 1}) {
      for (int cy : {box.y0, box.y1 - 1}) {
        const Vec3 p = i_t_m.apply(back_project({static_cast<double>(cx), static_cast<double>(cy)}, z, k));
        if (!(p.z() > 0.0)) return {0, 0, k.width, k.height};
        const PixelPoint q = project(p, k);
        u0 = std::min(u0, q.u);
        v0 = std::min(v0, q.v);
        u1 = std::max(u1, q.u);
        v1 = std::max(v1, q.v);
      }
    }
  }
  const PixelRect r{static_cast<int>(std::floor(u0)), static_cast<int>(std::floor(v0)),
                    static_cast<int>(std::ceil(u1)) + 1, static_cast<int>(std::ceil(v1)) + 1};
  return r.grown(2).clipped(k.width, k.height);
}

TargetCache prepare(const CalibrationTarget& t, const CalibOptions& opt) {
  if (!t.trajectory) throw ConfigError("calibration target has no trajectory", "trajectory");
  const CameraIntrinsics& k = t.intrinsics;
  if (t.gt.width() != k.width || t.gt.height() != k.height) {
    throw ConfigError("ground truth resolution differs from the intrinsics", "gt");
  }
  TargetCache c;
  c.target = &t;
  c.poses = window_poses(*t.trajectory, t.t_s, opt.window_us);
  const EventWindow win = make_window(t.events, t.t_s, opt.window_us);
  PixelRect box{k.width, k.height, 0, 0};
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      if (!t.gt.mask(x, y)) continue;
      c.mask_index.push_back(static_cast<std::size_t>(y) * k.width + x);
      c.gt_depth.push_back(t.gt.depth(x, y));
      c.gt_indentation.push_back(t.gt.indentation(x, y));
      box.x0 = std::min(box.x0, x);
      box.y0 = std::min(box.y0, y);
      box.x1 = std::max(box.x1, x + 1);
      box.y1 = std::max(box.y1, y + 1);
    }
  }
  if (c.mask_index.empty()) throw UndefinedMetricError("ground truth mask is empty");
  for (int i = 0; i < 3; ++i) {
    c.dsi[i] = build_dsi_summary(win, *t.trajectory, k, c.poses.pose[i], opt.dsi);
    c.roi[i] = i == 1 ? box : source_rect(box, c.poses.pose[1], c.poses.pose[i], k, opt.dsi.planes);
  }
  return c;
}

Samples sample(const TargetCache& tc, std::array<DepthExtractor, 3>& ex, int c, int g_f) {
  const CameraIntrinsics& k = tc.target->intrinsics;
  Samples s;
  for (int i = 0; i < 3; ++i) {
    DepthMap z = ex[i].extract(c, g_f);
    const DepthMap warped = i == 1 ? std::move(z) : warp_depth(z, tc.poses.pose[i], tc.poses.pose[1], k).map;
    s.depth[i].resize(tc.mask_index.size());
    s.valid[i].resize(tc.mask_index.size());
    for (std::size_t p = 0; p < tc.mask_index.size(); ++p) {
      s.depth[i][p] = warped.depth.data()[tc.mask_index[p]];
      s.valid[i][p] = warped.valid.data()[tc.mask_index[p]];
    }
  }
  return s;
}

// Same accumulation order as masked_mae over the fused map.
MaeResult score(const TargetCache& tc, const Samples& s, const std::array<double, 3>& w, MaskMode mode) {
  double sum = 0.0;
  std::size_t n = 0, hit = 0;
  std::array<double, 3> d{};
  std::array<bool, 3> ok{};
  for (std::size_t p = 0; p < tc.mask_index.size(); ++p) {
    for (int i = 0; i < 3; ++i) {
      d[i] = s.depth[i][p];
      ok[i] = s.valid[i][p] != 0;
    }
    double z = 0.0;
    if (fuse_pixel(d, ok, w, z)) {
      sum += std::abs(z - tc.gt_depth[p]);
      ++n;
      ++hit;
    } else if (mode == MaskMode::strict) {
      sum += std::abs(tc.gt_indentation[p]);
      ++n;
    }
  }
  MaeResult r;
  r.n = n;
  r.coverage = static_cast<double>(hit) / static_cast<double>(tc.mask_index.size());
  r.mae_mm = n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

std::array<DepthExtractor, 3> extractors(const TargetCache& tc) {
  return {DepthExtractor(tc.dsi[0], &tc.roi[0]), DepthExtractor(tc.dsi[1], &tc.roi[1]),
          DepthExtractor(tc.dsi[2], &tc.roi[2])};
}

}  // namespace

void ScaleFactor::validate() const {
  if (!(f > 0.0) || !std::isfinite(f)) throw ConfigError("scale factor must be positive", "scale_f");
}

void CalibParams::validate() const {
  if (c < kMinC || c > kMaxC) throw ConfigError("C must lie within [5, 20]", "c");
  DepthExtractor::validate(c, g_f);
  weights.validate();
}

PipelineParams CalibParams::pipeline(PipelineParams base) const {
  base.c = c;
  base.g_f = g_f;
  base.weights = weights;
  return base;
}

std::size_t GroundTruthDepth::mask_count() const {
  std::size_t n = 0;
  for (auto m : mask.values()) n += (m != 0);
  return n;
}

double GroundTruthDepth::sphere_residual(int x, int y) const {
  const double dx = x - circle.x_b, dy = y - circle.y_b, dz = indentation_px(x, y) - z_b;
  return std::abs(std::sqrt(dx * dx + dy * dy + dz * dz) - r_sphere_px);
}

ContactCircle detect_contact_circle(const DepthMap& depth, const ContactOptions& opt) {
  const int w = depth.width(), h = depth.height();
  cv::Mat bin(h, w, CV_8U, cv::Scalar(0));
  bool any = false;
  for (int y = 0; y < h; ++y) {
    auto* row = bin.ptr<std::uint8_t>(y);
    for (int x = 0; x < w; ++x) {
      if (!depth.is_valid(x, y)) continue;
      if (opt.min_indentation_mm > 0.0 && !(opt.nominal_depth_mm - depth.depth(x, y) > opt.min_indentation_mm)) {
        continue;
      }
      row[x] = 255;
      any = true;
    }
  }
  if (!any) throw EmptyContactError("no contact pixels in depth map");
  if (opt.close_px > 1) {
    const cv::Mat kernel = cv::getStructuringElement(cv::MORPH_ELLIPSE, cv::Size(opt.close_px, opt.close_px));
    cv::morphologyEx(bin, bin, cv::MORPH_CLOSE, kernel);
  }
  cv::Mat labels, stats, centroids;
  const int n = cv::connectedComponentsWithStats(bin, labels, stats, centroids, 8, CV_32S);
  int best = 0, best_area = 0;
  for (int l = 1; l < n; ++l) {
    const int area = stats.at<int>(l, cv::CC_STAT_AREA);
    if (area > best_area) {
      best = l;
      best_area = area;
    }
  }
  if (best == 0) throw EmptyContactError("no contact component found");
  std::vector<cv::Point> pts;
  pts.reserve(static_cast<std::size_t>(best_area));
  for (int y = 0; y < h; ++y) {
    const int* row = labels.ptr<int>(y);
    for (int x = 0; x < w; ++x) {
      if (row[x] == best) pts.emplace_back(x, y);
    }
  }
  cv::Point2f centre;
  float radius = 0.0f;
  cv::minEnclosingCircle(pts, centre, radius);
  return {static_cast<double>(radius), static_cast<double>(centre.x), static_cast<double>(centre.y)};
}

double sphere_center_depth(double r, double r_sphere_px) {
  if (!(r >= 0.0) || !(r <= r_sphere_px)) {
    throw GeometryError("contact radius " + std::to_string(r) + " px outside [0, " + std::to_string(r_sphere_px) +
                        "]");
  }
  return -std::sqrt(r_sphere_px * r_sphere_px - r * r);
}

GroundTruthDepth sphere_ground_truth(const ContactCircle& circle, double r_sphere_mm, const ScaleFactor& f, int width,
                                     int height, double nominal_depth_mm) {
  f.validate();
  if (!(r_sphere_mm > 0.0)) throw ConfigError("sphere radius must be positive", "sphere_radius_mm");
  if (width <= 0 || height <= 0) throw ConfigError("image size must be positive", "intrinsics");
  GroundTruthDepth gt;
  gt.circle = circle;
  gt.f = f.f;
  gt.nominal_depth_mm = nominal_depth_mm;
  gt.r_sphere_px = r_sphere_mm / f.f;
  gt.z_b = sphere_center_depth(circle.r, gt.r_sphere_px);
  gt.indentation_px = Grid<double>(width, height, 0.0);
  gt.indentation = Grid<double>(width, height, 0.0);
  gt.mask = Grid<std::uint8_t>(width, height, 0);
  const double r2 = circle.r * circle.r, big2 = gt.r_sphere_px * gt.r_sphere_px;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = x - circle.x_b, dy = y - circle.y_b;
      const double d2 = dx * dx + dy * dy;
      if (d2 > r2) continue;
      // Branch towards the camera: the cap above the membrane plane.
      const double z = gt.z_b + std::sqrt(big2 - d2);
      gt.indentation_px(x, y) = z;
      gt.indentation(x, y) = z * f.f;
      gt.mask(x, y) = 1;
    }
  }
  return gt;
}

MaeResult masked_mae(const DepthMap& z, const GroundTruthDepth& gt, MaskMode mode) {
  if (z.width() != gt.width() || z.height() != gt.height()) {
    throw InvalidInputError("depth map and ground truth differ in resolution");
  }
  double sum = 0.0;
  std::size_t n = 0, hit = 0, masked = 0;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!gt.mask(x, y)) continue;
      ++masked;
      if (z.is_valid(x, y)) {
        sum += std::abs(z.depth(x, y) - gt.depth(x, y));
        ++n;
        ++hit;
      } else if (mode == MaskMode::strict) {
        sum += std::abs(gt.indentation(x, y));
        ++n;
      }
    }
  }
  if (n == 0) throw UndefinedMetricError("no masked pixel is valid in the depth map");
  return {sum / static_cast<double>(n), static_cast<double>(hit) / static_cast<double>(masked), n};
}

CalibGrid CalibGrid::full() {
  CalibGrid g;
  for (int c = kMinC; c <= kMaxC; ++c) g.c_values.push_back(c);
  for (int gf = kMinGf; gf <= kMaxGf; gf += 2) g.g_f_values.push_back(gf);
  g.simplex_steps = 18;
  return g;
}

void CalibGrid::validate() const {
  if (c_values.empty() || g_f_values.empty()) throw ConfigError("calibration grid is empty", "grid");
  if (simplex_steps < 1) throw ConfigError("simplex step count must be positive", "grid.simplex_steps");
  for (int c : c_values) {
    if (c < kMinC || c > kMaxC) throw ConfigError("C must lie within [5, 20]", "grid.c");
  }
  for (int g : g_f_values) DepthExtractor::validate(kMinC, g);
}

std::vector<FusionWeights> CalibGrid::weights() const {
  std::vector<FusionWeights> out;
  const int n = simplex_steps;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; i + j <= n; ++j) {
      const int k = n - i - j;
      out.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n, static_cast<double>(k) / n});
    }
  }
  return out;
}

std::string CalibGrid::describe() const {
  std::ostringstream os;
  os << "c:";
  for (std::size_t i = 0; i < c_values.size(); ++i) os << (i ? "," : "") << c_values[i];
  os << " g_f:";
  for (std::size_t i = 0; i < g_f_values.size(); ++i) os << (i ? "," : "") << g_f_values[i];
  os << " simplex:1/" << simplex_steps;
  return os.str();
}

bool tie_break_less(const CalibParams& a, const CalibParams& b) {
  if (a.c != b.c) return a.c < b.c;
  if (a.g_f != b.g_f) return a.g_f < b.g_f;
  return a.weights.as_array() < b.weights.as_array();
}

CalibResult grid_search(std::span<const CalibrationTarget> targets, const CalibGrid& grid, const CalibOptions& opt) {
  grid.validate();
  if (targets.empty()) throw ConfigError("no calibration targets", "targets");
  std::vector<TargetCache> caches;
  caches.reserve(targets.size());
  for (const auto& t : targets) caches.push_back(prepare(t, opt));

  const std::vector<FusionWeights> weights = grid.weights();
  const std::size_t n_c = grid.c_values.size(), n_g = grid.g_f_values.size(), n_w = weights.size();
  std::vector<double> mae(n_c * n_g * n_w, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> cov(mae.size(), 0.0);
  std::vector<std::string> errors(n_c * n_g);

  parallel_chunks(n_g, resolve_threads(opt.threads), [&](int, std::size_t g0, std::size_t g1) {
    std::vector<std::array<DepthExtractor, 3>> ex;
    ex.reserve(caches.size());
    for (const auto& tc : caches) ex.push_back(extractors(tc));
    for (std::size_t gi = g0; gi < g1; ++gi) {
      for (std::size_t ci = 0; ci < n_c; ++ci) {
        const std::size_t cell = ci * n_g + gi;
        try {
          std::vector<Samples> s;
          s.reserve(caches.size());
          for (std::size_t t = 0; t < caches.size(); ++t) {
            s.push_back(sample(caches[t], ex[t], grid.c_values[ci], grid.g_f_values[gi]));
          }
          for (std::size_t wi = 0; wi < n_w; ++wi) {
            const auto w = weights[wi].as_array();
            double m = 0.0, cv = 0.0;
            bool defined = true;
            for (std::size_t t = 0; t < caches.size() && defined; ++t) {
              const MaeResult r = score(caches[t], s[t], w, opt.mask_mode);
              defined = r.n > 0;
              m += r.mae_mm;
              cv += r.coverage;
            }
            if (!defined) continue;
            mae[cell * n_w + wi] = m / static_cast<double>(caches.size());
            cov[cell * n_w + wi] = cv / static_cast<double>(caches.size());
          }
        } catch (const Error& e) {
          errors[cell] = e.what();
        }
      }
    }
  });

  CalibResult res;
  bool have = false;
  for (std::size_t ci = 0; ci < n_c; ++ci) {
    for (std::size_t gi = 0; gi < n_g; ++gi) {
      const std::size_t cell = ci * n_g + gi;
      if (!errors[cell].empty()) {
        res.skipped += n_w;
        res.skip_log.push_back("c=" + std::to_string(grid.c_values[ci]) + " g_f=" +
                               std::to_string(grid.g_f_values[gi]) + ": " + errors[cell]);
        continue;
      }
      for (std::size_t wi = 0; wi < n_w; ++wi) {
        const double m = mae[cell * n_w + wi];
        const CalibParams p{grid.c_values[ci], grid.g_f_values[gi], weights[wi]};
        if (std::isnan(m)) {
          ++res.skipped;
          continue;
        }
        ++res.evaluated;
        if (opt.record_all) res.points.push_back({p, m, cov[cell * n_w + wi]});
        if (!have || m < res.mae_mm || (m == res.mae_mm && tie_break_less(p, res.params))) {
          res.params = p;
          res.mae_mm = m;
          res.coverage = cov[cell * n_w + wi];
          have = true;
        }
      }
    }
  }
  if (res.skipped > 0 && res.skip_log.empty()) {
    res.skip_log.push_back(std::to_string(res.skipped) + " grid points had no valid masked pixel");
  }
  if (!have) throw UndefinedMetricError("masked MAE undefined at every grid point");
  return res;
}

MaeResult evaluate_params(const CalibrationTarget& target, const CalibParams& params, const CalibOptions& opt) {
  params.validate();
  if (!target.trajectory) throw ConfigError("calibration target has no trajectory", "trajectory");
  PipelineParams pp = params.pipeline();
  pp.dsi = opt.dsi;
  pp.window_us = opt.window_us;
  pp.method = FusionMethod::bma;
  const WindowReconstruction r = reconstruct_window(target.events, *target.trajectory, target.intrinsics, target.t_s, pp);
  return masked_mae(r.fused, target.gt, opt.mask_mode);
}

CrossValidation cross_validate(std::span<const CalibrationTarget> objects, std::span<const CalibParams> candidates,
                               const CalibOptions& opt) {
  if (objects.empty()) throw ConfigError("cross-validation needs at least one object", "objects");
  if (candidates.empty()) throw ConfigError("cross-validation needs at least one candidate", "candidates");
  for (const auto& c : candidates) c.validate();
  std::vector<TargetCache> caches;
  caches.reserve(objects.size());
  for (const auto& o : objects) caches.push_back(prepare(o, opt));

  CrossValidation cv;
  cv.e.assign(candidates.size(), 0.0);
  for (std::size_t t = 0; t < caches.size(); ++t) {
    auto ex = extractors(caches[t]);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const Samples s = sample(caches[t], ex, candidates[i].c, candidates[i].g_f);
      const MaeResult r = score(caches[t], s, candidates[i].weights.as_array(), opt.mask_mode);
      if (r.n == 0) throw UndefinedMetricError("candidate " + std::to_string(i) + " has no valid masked pixel");
      cv.e[i] += r.mae_mm / static_cast<double>(caches.size());
    }
  }
  cv.best = static_cast<std::size_t>(std::min_element(cv.e.begin(), cv.e.end()) - cv.e.begin());
  return cv;
}

}  // namespace evtac
