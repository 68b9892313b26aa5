#include "evtac/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "evtac/errors.hpp"
#include "evtac/parallel.hpp"

namespace evtac {
namespace {

constexpr double kMarchStepMm = 0.01;
constexpr int kBisectIters = 60;

// Smallest root of g(s) on [s0, s1] given g(s0) <= 0 <= g(s1), found by a
// fixed-step march followed by bisection.
template <class G>
double first_root(const G& g, double s0, double s1, double step) {
  double g0 = g(s0);
  if (g0 >= 0.0) return s0;
  const int n = std::max(1, static_cast<int>(std::ceil((s1 - s0) / step)));
  double a = s0;
  double b = s1;
  for (int i = 1; i <= n; ++i) {
    const double s = i == n ? s1 : s0 + (s1 - s0) * i / n;
    if (g(s) >= 0.0) {
      b = s;
      break;
    }
    a = s;
  }
  for (int i = 0; i < kBisectIters; ++i) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    if (g(m) >= 0.0) {
      b = m;
    } else {
      a = m;
    }
  }
  return b;
}

bool any_support_overlap(const SurfaceModel& s, double x0, double x1, double y0, double y1) {
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  for (const auto& b : s.support()) {
    if (b.x1 >= x0 && b.x0 <= x1 && b.y1 >= y0 && b.y0 <= y1) return true;
  }
  return false;
}

double shade(const ShadingModel& m, double gx, double gy) { return std::log(m.i0 + m.gain * std::hypot(gx, gy)); }

// Central difference with one-sided fallback at the borders.
inline double diff(const double* lo, const double* hi, double span) { return (*hi - *lo) / span; }

// --- Row tables for translating cameras -----------------------------------
//
// With identity rotation and the camera moving only along X, every image row
// v sweeps a fixed plane Y = cam_y + b_v (Z - cam_z). The membrane cut by that
// plane is a curve Z(X) that can be tabulated once and rasterised per frame.

struct RowTable {
  double x0 = 0.0;
  double dx = 0.0;
  std::vector<double> z;                   // camera-frame depth per sample
  std::vector<std::pair<int, int>> spans;  // inclusive sample ranges near the object
  bool active() const { return !spans.empty(); }
};

struct RowGeometry {
  const SurfaceModel* surface;
  CameraIntrinsics k;
  double cam_y;
  double cam_z;
  double base;  // camera-frame depth of the bare plate
  double zmin;  // camera-frame depth of the highest possible point
};

RowTable build_row_table(const RowGeometry& g, int v) {
  RowTable t;
  const SurfaceModel& s = *g.surface;
  if (s.max_height() <= 0.0) return t;
  const double b = (v - g.k.cy) / g.k.fy;
  const double ya = g.cam_y + b * g.zmin;
  const double yb = g.cam_y + b * g.base;
  const double ylo = std::min(ya, yb), yhi = std::max(ya, yb);

  std::vector<std::pair<double, double>> iv;
  for (const auto& box : s.support()) {
    if (box.y1 >= ylo && box.y0 <= yhi) iv.emplace_back(box.x0, box.x1);
  }
  if (iv.empty()) return t;
  std::sort(iv.begin(), iv.end());

  t.dx = 0.25 * g.base / g.k.fx;  // a quarter pixel on the plate
  const double lo = iv.front().first;
  double hi = lo;
  for (const auto& p : iv) hi = std::max(hi, p.second);
  t.x0 = lo - 2.0 * t.dx;
  const int n = static_cast<int>(std::ceil((hi - t.x0) / t.dx)) + 3;
  t.z.assign(static_cast<std::size_t>(n), g.base);

  for (const auto& [a, c] : iv) {
    const int j0 = std::max(0, static_cast<int>(std::floor((a - t.x0) / t.dx)) - 1);
    const int j1 = std::min(n - 1, static_cast<int>(std::ceil((c - t.x0) / t.dx)) + 1);
    if (!t.spans.empty() && j0 <= t.spans.back().second + 1) {
      t.spans.back().second = std::max(t.spans.back().second, j1);
    } else {
      t.spans.emplace_back(j0, j1);
    }
  }

  const double plate = s.plate_depth();
  for (const auto& [j0, j1] : t.spans) {
    for (int j = j0; j <= j1; ++j) {
      const double x = t.x0 + j * t.dx;
      if (b == 0.0) {
        t.z[j] = plate - s.height(x, g.cam_y) - g.cam_z;
        continue;
      }
      // Root of  Zc - base + h(X, Y(Zc)) = 0  nearest to the camera.
      auto fn = [&](double zc) { return zc - g.base + s.height(x, g.cam_y + b * zc); };
      t.z[j] = first_root(fn, g.zmin, g.base, kMarchStepMm);
    }
  }
  return t;
}

RowGeometry make_row_geometry(const SurfaceModel& s, const CameraIntrinsics& k, double cam_y, double cam_z) {
  const double base = s.plate_depth() - cam_z;
  if (!(base > 0.0)) throw InvalidInputError("surface lies behind the camera");
  const double zmin = base - s.max_height();
  if (!(zmin > 0.0)) throw InvalidInputError("surface intersects the camera plane");
  return {&s, k, cam_y, cam_z, base, zmin};
}

std::vector<RowTable> build_row_tables(const RowGeometry& g, int threads) {
  std::vector<RowTable> tables(static_cast<std::size_t>(g.k.height));
  parallel_chunks(tables.size(), threads, [&](int, std::size_t b, std::size_t e) {
    for (std::size_t v = b; v < e; ++v) tables[v] = build_row_table(g, static_cast<int>(v));
  });
  return tables;
}

struct Span {
  int lo = std::numeric_limits<int>::max();
  int hi = std::numeric_limits<int>::min();
  bool empty() const { return lo > hi; }
  void add(int a, int b) {
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  }
  void add(const Span& s) {
    if (!s.empty()) add(s.lo, s.hi);
  }
};

// Z-buffers the tabulated curve into `row` for a camera at cam_x and returns
// the hull of written pixels. `row` must hold the plate depth outside it.
Span rasterise_row(const RowTable& t, const RowGeometry& g, double cam_x, double* row) {
  Span dirty;
  if (!t.active()) return dirty;
  const int w = g.k.width;
  const double a_lo = (-1.0 - g.k.cx) / g.k.fx;
  const double a_hi = (w - g.k.cx) / g.k.fx;
  const double x_lo = cam_x + std::min(a_lo * g.zmin, a_lo * g.base);
  const double x_hi = cam_x + std::max(a_hi * g.zmin, a_hi * g.base);
  const int vis0 = static_cast<int>(std::floor((x_lo - t.x0) / t.dx)) - 1;
  const int vis1 = static_cast<int>(std::ceil((x_hi - t.x0) / t.dx)) + 1;

  for (const auto& [s0, s1] : t.spans) {
    const int j0 = std::max(s0, vis0);
    const int j1 = std::min(s1, vis1);
    if (j0 >= j1) continue;
    double xa = t.x0 + j0 * t.dx;
    double za = t.z[j0];
    double ua = g.k.cx + g.k.fx * (xa - cam_x) / za;
    for (int j = j0 + 1; j <= j1; ++j) {
      const double xb = t.x0 + j * t.dx;
      const double zb = t.z[j];
      const double ub = g.k.cx + g.k.fx * (xb - cam_x) / zb;
      double u0 = ua, u1 = ub, z0 = za, z1 = zb;
      if (u0 > u1) {
        std::swap(u0, u1);
        std::swap(z0, z1);
      }
      const int p0 = std::max(0, static_cast<int>(std::ceil(u0)));
      const int p1 = std::min(w - 1, static_cast<int>(std::floor(u1)));
      if (p0 <= p1) {
        const double du = u1 - u0;
        for (int p = p0; p <= p1; ++p) {
          const double z = du > 0.0 ? z0 + (p - u0) / du * (z1 - z0) : std::min(z0, z1);
          if (z < row[p]) row[p] = z;
        }
        dirty.add(p0, p1);
      }
      ua = ub;
      za = zb;
    }
  }
  return dirty;
}

bool is_translating_scan(const Trajectory& traj) {
  const auto& s = traj.samples();
  for (const auto& p : s) {
    if (p.quaternion().angularDistance(Quat::Identity()) > 1e-12) return false;
    if (std::abs(p.translation().y() - s.front().translation().y()) > 1e-9) return false;
    if (std::abs(p.translation().z() - s.front().translation().z()) > 1e-9) return false;
  }
  return true;
}

std::vector<TimeUs> sample_times(const Trajectory& traj, double rate_hz) {
  std::vector<TimeUs> times;
  if (traj.empty()) return times;
  const TimeUs t0 = traj.begin_time();
  const TimeUs t1 = traj.end_time();
  const double dt = 1e6 / rate_hz;
  for (long k = 0;; ++k) {
    const TimeUs t = t0 + static_cast<TimeUs>(std::llround(k * dt));
    if (t > t1) break;
    times.push_back(t);
  }
  return times;
}

struct PixelState {
  std::vector<double> l_ref;
  std::vector<double> l_prev;
};

inline void fire(double l, double l_prev, double& l_ref, double c, TimeUs t_prev, TimeUs t_cur, int x, int y,
                 std::vector<Event>& out) {
  const double d = l - l_ref;
  if (d >= c || d <= -c) {
    const double level = d > 0.0 ? l_ref + c : l_ref - c;
    double frac = (l != l_prev) ? (level - l_prev) / (l - l_prev) : 1.0;
    frac = std::clamp(frac, 0.0, 1.0);
    const TimeUs t = t_prev + static_cast<TimeUs>(std::llround(frac * static_cast<double>(t_cur - t_prev)));
    out.push_back({static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                   static_cast<std::int8_t>(d > 0.0 ? 1 : -1), std::max(t, t_prev + 1)});
    l_ref = l;
  }
}

EventStream events_translating(const SurfaceModel& surface, const ScanConfig& cfg, const Trajectory& traj,
                               const std::vector<TimeUs>& times, int threads) {
  const auto& k = cfg.intrinsics;
  const Vec3 p0 = traj.samples().front().translation();
  const RowGeometry geo = make_row_geometry(surface, k, p0.y(), p0.z());
  const auto tables = build_row_tables(geo, threads);
  std::vector<double> cam_x(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) cam_x[i] = traj.at(times[i]).translation().x();

  const int w = k.width, h = k.height;
  const double l0 = std::log(cfg.shading.i0);
  PixelState state{std::vector<double>(static_cast<std::size_t>(w) * h, l0),
                   std::vector<double>(static_cast<std::size_t>(w) * h, l0)};

  const int bands = std::max(1, std::min(threads, h));
  std::vector<std::vector<Event>> band_events(static_cast<std::size_t>(bands));
  parallel_chunks(static_cast<std::size_t>(h), bands, [&](int chunk, std::size_t b, std::size_t e) {
    const int v0 = static_cast<int>(b), v1 = static_cast<int>(e);
    const int r0 = std::max(0, v0 - 1), r1 = std::min(h, v1 + 1);
    const int nr = r1 - r0;
    bool any = false;
    for (int r = r0; r < r1; ++r) any = any || tables[r].active();
    if (!any) return;

    std::vector<double> depth(static_cast<std::size_t>(nr) * w, geo.base);
    std::vector<Span> dirty(static_cast<std::size_t>(nr));
    std::vector<Span> prev_active(static_cast<std::size_t>(v1 - v0));
    auto drow = [&](int r) { return depth.data() + static_cast<std::size_t>(r - r0) * w; };
    auto& out = band_events[static_cast<std::size_t>(chunk)];

    for (std::size_t fi = 0; fi < times.size(); ++fi) {
      for (int r = r0; r < r1; ++r) {
        if (!tables[r].active()) continue;
        Span& d = dirty[r - r0];
        double* row = drow(r);
        if (!d.empty()) std::fill(row + d.lo, row + d.hi + 1, geo.base);
        d = rasterise_row(tables[r], geo, cam_x[fi], row);
      }
      for (int v = v0; v < v1; ++v) {
        Span act;
        for (int r = std::max(r0, v - 1); r <= std::min(r1 - 1, v + 1); ++r) act.add(dirty[r - r0]);
        if (!act.empty()) {
          act.lo = std::max(0, act.lo - 1);
          act.hi = std::min(w - 1, act.hi + 1);
        }
        Span proc = act;
        proc.add(prev_active[v - v0]);
        prev_active[v - v0] = act;
        if (proc.empty()) continue;

        const double* rc = drow(v);
        const double* ru = v > 0 ? drow(v - 1) : rc;
        const double* rd = v < h - 1 ? drow(v + 1) : rc;
        const double vspan = (v > 0 && v < h - 1) ? 2.0 : 1.0;
        for (int u = proc.lo; u <= proc.hi; ++u) {
          const int ul = u > 0 ? u - 1 : u;
          const int ur = u < w - 1 ? u + 1 : u;
          const double gx = diff(rc + ul, rc + ur, static_cast<double>(ur - ul));
          const double gy = diff(ru + u, rd + u, vspan);
          const double l = shade(cfg.shading, gx, gy);
          const std::size_t idx = static_cast<std::size_t>(v) * w + u;
          if (fi == 0) {
            state.l_ref[idx] = l;
          } else {
            fire(l, state.l_prev[idx], state.l_ref[idx], cfg.c_sim, times[fi - 1], times[fi], u, v, out);
          }
          state.l_prev[idx] = l;
        }
      }
    }
  });

  EventStream events;
  for (auto& be : band_events) events.insert(events.end(), be.begin(), be.end());
  return events;
}

EventStream events_generic(const SurfaceModel& surface, const ScanConfig& cfg, const Trajectory& traj,
                           const std::vector<TimeUs>& times, int threads) {
  const auto& k = cfg.intrinsics;
  EventStream events;
  std::vector<double> l_ref, l_prev;
  for (std::size_t fi = 0; fi < times.size(); ++fi) {
    const auto dm = ground_truth_depth(surface, traj.at(times[fi]), k, threads);
    const auto l = log_intensity_from_depth(dm.depth, cfg.shading);
    if (fi == 0) {
      l_ref = l.values();
      l_prev = l.values();
      continue;
    }
    for (int v = 0; v < k.height; ++v) {
      for (int u = 0; u < k.width; ++u) {
        const std::size_t idx = static_cast<std::size_t>(v) * k.width + u;
        fire(l(u, v), l_prev[idx], l_ref[idx], cfg.c_sim, times[fi - 1], times[fi], u, v, events);
        l_prev[idx] = l(u, v);
      }
    }
  }
  return events;
}

void add_noise(const ScanConfig& cfg, TimeUs t0, TimeUs t1, EventStream& events) {
  if (cfg.noise_rate_hz <= 0.0 || t1 <= t0) return;
  const auto& k = cfg.intrinsics;
  std::mt19937_64 rng(cfg.seed);
  const double mean = cfg.noise_rate_hz * k.width * k.height * static_cast<double>(t1 - t0) * 1e-6;
  const auto n = std::poisson_distribution<long long>(mean)(rng);
  std::uniform_int_distribution<int> ux(0, k.width - 1), uy(0, k.height - 1), up(0, 1);
  std::uniform_int_distribution<TimeUs> ut(t0, t1);
  for (long long i = 0; i < n; ++i) {
    Event e;
    e.x = static_cast<std::uint16_t>(ux(rng));
    e.y = static_cast<std::uint16_t>(uy(rng));
    e.polarity = static_cast<std::int8_t>(up(rng) ? 1 : -1);
    e.t = ut(rng);
    events.push_back(e);
  }
}

}  // namespace

void ScanConfig::validate() const {
  intrinsics.validate();
  if (v_mm_s < 0.0) throw ConfigError("must be non-negative", "scan/v_mm_s");
  if (scan_length_mm < 0.0) throw ConfigError("must be non-negative", "scan/scan_length_mm");
  if (!(c_sim > 0.0)) throw ConfigError("must be positive", "scan/c_sim");
  if (noise_rate_hz < 0.0) throw ConfigError("must be non-negative", "scan/noise_rate_hz");
  if (sample_rate_hz < 10'000.0) throw ConfigError("must be at least 10 kHz", "scan/sample_rate_hz");
  if (!(pose_rate_hz > 0.0)) throw ConfigError("must be positive", "scan/pose_rate_hz");
  if (!(shading.i0 > 0.0)) throw ConfigError("must be positive", "scan/shading/i0");
  if (shading.gain < 0.0) throw ConfigError("must be non-negative", "scan/shading/gain");
  if (static_duration_us < 0) throw ConfigError("must be non-negative", "scan/static_duration_us");
}

TimeUs ScanConfig::duration_us() const {
  if (v_mm_s <= 0.0) return static_duration_us;
  return static_cast<TimeUs>(std::llround(scan_length_mm / v_mm_s * 1e6));
}

Trajectory make_scan_trajectory(const ScanConfig& cfg) {
  cfg.validate();
  const TimeUs dur = cfg.duration_us();
  const double step = 1e6 / cfg.pose_rate_hz;
  std::vector<PoseSE3> poses;
  auto pose_at = [&](TimeUs t) {
    return PoseSE3::from_translation(cfg.x_start_mm + cfg.v_mm_s * static_cast<double>(t) * 1e-6, cfg.y_mm, 0.0, t);
  };
  for (long i = 0;; ++i) {
    const TimeUs t = static_cast<TimeUs>(std::llround(i * step));
    if (t >= dur) break;
    poses.push_back(pose_at(t));
  }
  poses.push_back(pose_at(dur));
  return Trajectory(std::move(poses));
}

DepthMap ground_truth_depth(const SurfaceModel& surface, const PoseSE3& pose, const CameraIntrinsics& k,
                            int threads) {
  k.validate();
  const Mat3 r = pose.rotation();
  const Vec3 o = pose.translation();
  const double plate = surface.plate_depth();
  const double hmax = surface.max_height();
  if (!(plate - o.z() > 0.0)) throw InvalidInputError("surface lies behind the camera");

  DepthMap dm(k.width, k.height);
  dm.reference = pose;
  dm.t_start = dm.t_end = pose.timestamp();
  parallel_chunks(static_cast<std::size_t>(k.height), resolve_threads(threads), [&](int, std::size_t b, std::size_t e) {
    for (int v = static_cast<int>(b); v < static_cast<int>(e); ++v) {
      for (int u = 0; u < k.width; ++u) {
        const Vec3 d = r * Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        if (!(d.z() > 0.0)) continue;
        const double s_far = (plate - o.z()) / d.z();
        double s = s_far;
        if (hmax > 0.0) {
          const double s_near = std::max((plate - hmax - o.z()) / d.z(), 0.0);
          const Vec3 pn = o + s_near * d, pf = o + s_far * d;
          if (any_support_overlap(surface, pn.x(), pf.x(), pn.y(), pf.y())) {
            auto g = [&](double si) {
              const Vec3 p = o + si * d;
              return p.z() - plate + surface.height(p.x(), p.y());
            };
            s = first_root(g, s_near, s_far, kMarchStepMm / d.z());
          }
        }
        if (s > 0.0) dm.set(u, v, s);
      }
    }
  });
  return dm;
}

Grid<double> log_intensity_from_depth(const Grid<double>& depth, const ShadingModel& shading) {
  const int w = depth.width(), h = depth.height();
  Grid<double> l(w, h);
  for (int v = 0; v < h; ++v) {
    const int va = v > 0 ? v - 1 : v, vb = v < h - 1 ? v + 1 : v;
    for (int u = 0; u < w; ++u) {
      const int ua = u > 0 ? u - 1 : u, ub = u < w - 1 ? u + 1 : u;
      const double gx = ub > ua ? (depth(ub, v) - depth(ua, v)) / (ub - ua) : 0.0;
      const double gy = vb > va ? (depth(u, vb) - depth(u, va)) / (vb - va) : 0.0;
      l(u, v) = shade(shading, gx, gy);
    }
  }
  return l;
}

Grid<double> render_log_intensity(const SurfaceModel& surface, const PoseSE3& pose, const CameraIntrinsics& k,
                                  const ShadingModel& shading, int threads) {
  return log_intensity_from_depth(ground_truth_depth(surface, pose, k, threads).depth, shading);
}

Grid<double> render_depth_translating(const SurfaceModel& surface, const CameraIntrinsics& k, double cam_x,
                                      double cam_y, double cam_z) {
  k.validate();
  const RowGeometry geo = make_row_geometry(surface, k, cam_y, cam_z);
  const auto tables = build_row_tables(geo, 1);
  Grid<double> out(k.width, k.height, geo.base);
  for (int v = 0; v < k.height; ++v) rasterise_row(tables[v], geo, cam_x, out.row(v));
  return out;
}

EventStream generate_events(const SurfaceModel& surface, const ScanConfig& cfg, const Trajectory& traj) {
  cfg.validate();
  if (traj.empty()) return {};
  const int threads = resolve_threads(cfg.threads);
  const auto times = sample_times(traj, cfg.sample_rate_hz);
  EventStream events = is_translating_scan(traj) ? events_translating(surface, cfg, traj, times, threads)
                                                 : events_generic(surface, cfg, traj, times, threads);
  add_noise(cfg, traj.begin_time(), traj.end_time(), events);
  std::sort(events.begin(), events.end(), event_before);
  return events;
}

SimulatedScan simulate_scan(const SurfaceModel& surface, const ScanConfig& cfg) {
  SimulatedScan scan;
  scan.trajectory = make_scan_trajectory(cfg);
  scan.events = generate_events(surface, cfg, scan.trajectory);
  return scan;
}

}  // namespace evtac
