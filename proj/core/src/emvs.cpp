#include "evtac/emvs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <opencv2/imgproc.hpp>

#include "evtac/errors.hpp"
#include "evtac/parallel.hpp"

namespace evtac {
namespace {

constexpr int kMaxFilter = 91;
constexpr int kMinFilter = 11;

// An event ray in the reference camera frame, reduced to the affine form
// u(z) = au / z + bu, v(z) = av / z + bv of its image on plane z. Rays that
// only meet planes beyond `z_after` are skipped there.
struct Ray {
  double au, bu, av, bv;
  double z_after;
};

std::vector<Ray> event_rays(const EventWindow& window, const Trajectory& traj, const CameraIntrinsics& k,
                            const PoseSE3& reference) {
  k.validate();
  std::vector<Ray> rays;
  rays.reserve(window.events.size());
  const PoseSE3 ref_inv = reference.inverse();
  TimeUs cached_t = 0;
  Mat3 r;
  Vec3 o;
  bool have = false;
  for (const Event& e : window.events) {
    if (!have || e.t != cached_t) {
      const PoseSE3 rel = ref_inv * traj.at(e.t);
      r = rel.rotation();
      o = rel.translation();
      cached_t = e.t;
      have = true;
    }
    const Vec3 d = r * Vec3((e.x - k.cx) / k.fx, (e.y - k.cy) / k.fy, 1.0);
    if (!(d.z() > 0.0)) continue;
    const double tx = d.x() / d.z(), ty = d.y() / d.z();
    rays.push_back({k.fx * (o.x() - o.z() * tx), k.fx * tx + k.cx, k.fy * (o.y() - o.z() * ty), k.fy * ty + k.cy,
                    o.z()});
  }
  return rays;
}

// Votes all rays into one plane.
void vote_plane(const std::vector<Ray>& rays, const CameraIntrinsics& k, double z, std::uint32_t* plane) {
  const int w = k.width, h = k.height;
  const double iz = 1.0 / z;
  for (const Ray& r : rays) {
    if (!(z > r.z_after)) continue;
    // floor(t) lies in [0, w) exactly when t does, and then equals the truncation.
    const double tu = r.au * iz + r.bu + 0.5;
    const double tv = r.av * iz + r.bv + 0.5;
    if (!(tu >= 0.0 && tu < w && tv >= 0.0 && tv < h)) continue;
    ++plane[static_cast<std::size_t>(static_cast<int>(tv) * w + static_cast<int>(tu))];
  }
}

// Rays whose image rows can reach one horizontal band of the reference view.
// Bands partition the rows, so each band owns its voxels outright.
struct RowBand {
  int y0 = 0, y1 = 0;
  std::vector<Ray> rays;
};

constexpr std::size_t kRaysPerBand = 8192;

std::vector<RowBand> split_rows(const std::vector<Ray>& rays, const std::vector<double>& depths, int height) {
  const int n_bands = static_cast<int>(std::clamp<std::size_t>(rays.size() / kRaysPerBand, 1, height / 4 + 1));
  std::vector<RowBand> bands(static_cast<std::size_t>(n_bands));
  for (int b = 0; b < n_bands; ++b) {
    bands[b].y0 = b * height / n_bands;
    bands[b].y1 = (b + 1) * height / n_bands;
  }
  const double iz_near = 1.0 / depths.front(), iz_far = 1.0 / depths.back();
  for (const Ray& r : rays) {
    // v is affine in 1/z, so its extremes over the volume sit at the end planes.
    const double va = r.av * iz_near + r.bv + 0.5, vb = r.av * iz_far + r.bv + 0.5;
    const double lo = std::min(va, vb), hi = std::max(va, vb);
    if (!(hi >= 0.0) || !(lo < height)) continue;
    const int y_lo = lo < 0.0 ? 0 : static_cast<int>(lo);
    const int y_hi = hi >= height ? height - 1 : static_cast<int>(hi);
    int b = std::max(0, y_lo * n_bands / height - 1);
    while (bands[b].y1 <= y_lo) ++b;
    for (; b < n_bands && bands[b].y0 <= y_hi; ++b) bands[b].rays.push_back(r);
  }
  return bands;
}

// Votes every plane of one band and folds each into the running max/argmax.
// Planes are visited nearest first, so a later plane only takes over on a
// strictly larger count and ties stay with the nearer plane. Index
// computation, scatter and fold are separate branch-free passes over data
// that stays cache resident.
void vote_band(const RowBand& band, const CameraIntrinsics& k, const std::vector<double>& depths, std::uint32_t* conf,
               std::uint16_t* arg) {
  const int w = k.width;
  const std::size_t base = static_cast<std::size_t>(band.y0) * w;
  std::vector<std::uint32_t> plane(static_cast<std::size_t>(band.y1 - band.y0) * w, 0u);
  std::vector<std::uint32_t> index(band.rays.size()), touched(band.rays.size());
  const double y0 = band.y0, y1 = band.y1;
  for (std::size_t z = 0; z < depths.size(); ++z) {
    const double depth = depths[z];
    const double iz = 1.0 / depth;
    std::size_t n = 0;
    for (const Ray& r : band.rays) {
      const double tu = r.au * iz + r.bu + 0.5;
      const double tv = r.av * iz + r.bv + 0.5;
      // floor(t) lies in [a, b) exactly when t does, and then equals the truncation.
      const bool inside = (depth > r.z_after) & (tu >= 0.0) & (tu < w) & (tv >= y0) & (tv < y1);
      index[n] = inside ? static_cast<std::uint32_t>(static_cast<int>(tv) * w + static_cast<int>(tu) - base) : 0u;
      n += inside;
    }
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::uint32_t i = index[j];
      touched[m] = i;
      m += plane[i]++ == 0;
    }
    const auto zi = static_cast<std::uint16_t>(z);
    for (std::size_t j = 0; j < m; ++j) {
      const std::uint32_t i = touched[j];
      const std::uint32_t c = plane[i];
      std::uint32_t& best = conf[base + i];
      std::uint16_t& at = arg[base + i];
      const bool more = c > best;
      best = more ? c : best;
      at = more ? zi : at;
      plane[i] = 0;
    }
  }
}

void check_reference(const Trajectory& traj, TimeUs t) {
  if (!traj.covers(t)) {
    throw OutOfRangeError("reference time " + std::to_string(t) + " us outside trajectory span");
  }
}

}  // namespace

void DepthPlanes::validate() const {
  if (count < 2) throw ConfigError("need at least two depth planes", "planes/count");
  if (count > 65535) throw ConfigError("too many depth planes", "planes/count");
  if (!(z_min > 0.0) || !(z_max > z_min)) throw ConfigError("need 0 < z_min < z_max", "planes/z_min");
}

std::vector<double> DepthPlanes::depths() const {
  validate();
  std::vector<double> d(static_cast<std::size_t>(count));
  const double a = 1.0 / z_min, b = 1.0 / z_max;
  for (int i = 0; i < count; ++i) d[i] = 1.0 / (a + (b - a) * i / (count - 1));
  d.front() = z_min;
  d.back() = z_max;
  return d;
}

EventWindow make_window(std::span<const Event> sorted, TimeUs t_s, TimeUs length_us) {
  if (length_us <= 0) throw ConfigError("window length must be positive", "window_us");
  return {t_s, t_s + length_us, time_slice(sorted, t_s, t_s + length_us)};
}

std::uint64_t Dsi::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

Dsi build_dsi(const EventWindow& window, const Trajectory& traj, const CameraIntrinsics& k, TimeUs ref_time,
              const DsiOptions& opt) {
  check_reference(traj, ref_time);
  return build_dsi(window, traj, k, traj.at(ref_time), opt);
}

Dsi build_dsi(const EventWindow& window, const Trajectory& traj, const CameraIntrinsics& k,
              const PoseSE3& reference, const DsiOptions& opt) {
  Dsi dsi;
  dsi.width = k.width;
  dsi.height = k.height;
  dsi.depths = opt.planes.depths();
  dsi.reference = reference;
  auto rays = event_rays(window, traj, k, reference);
  const std::size_t plane_size = static_cast<std::size_t>(k.width) * k.height;
  dsi.counts.assign(plane_size * dsi.depths.size(), 0u);
  // Planes are disjoint slices, so splitting by plane needs no merge step.
  parallel_chunks(dsi.depths.size(), resolve_threads(opt.threads), [&](int, std::size_t b, std::size_t e) {
    for (std::size_t z = b; z < e; ++z) vote_plane(rays, k, dsi.depths[z], dsi.counts.data() + z * plane_size);
  });
  return dsi;
}

DsiSummary build_dsi_summary(const EventWindow& window, const Trajectory& traj, const CameraIntrinsics& k,
                             TimeUs ref_time, const DsiOptions& opt) {
  check_reference(traj, ref_time);
  return build_dsi_summary(window, traj, k, traj.at(ref_time), opt);
}

DsiSummary build_dsi_summary(const EventWindow& window, const Trajectory& traj, const CameraIntrinsics& k,
                             const PoseSE3& reference, const DsiOptions& opt) {
  const auto depths = opt.planes.depths();
  const auto rays = event_rays(window, traj, k, reference);
  const int w = k.width, h = k.height;
  DsiSummary s{Grid<std::uint32_t>(w, h, 0u), Grid<std::uint16_t>(w, h, 0), depths, reference};
  const std::vector<RowBand> bands = split_rows(rays, depths, h);
  // Bands own disjoint rows, so any split of them across threads gives the same result.
  parallel_chunks(bands.size(), resolve_threads(opt.threads), [&](int, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) vote_band(bands[i], k, depths, s.confidence.data(), s.argmax.data());
  });
  return s;
}

DsiSummary summarize(const Dsi& dsi) {
  DsiSummary s{Grid<std::uint32_t>(dsi.width, dsi.height, 0u), Grid<std::uint16_t>(dsi.width, dsi.height, 0),
               dsi.depths, dsi.reference};
  for (int z = 0; z < dsi.planes(); ++z) {
    for (int y = 0; y < dsi.height; ++y) {
      for (int x = 0; x < dsi.width; ++x) {
        const std::uint32_t c = dsi.at(x, y, z);
        if (c > s.confidence(x, y)) {
          s.confidence(x, y) = c;
          s.argmax(x, y) = static_cast<std::uint16_t>(z);
        }
      }
    }
  }
  return s;
}

Grid<std::uint32_t> depth_to_confidence(const Dsi& dsi) { return summarize(dsi).confidence; }

PixelRect PixelRect::clipped(int w, int h) const {
  return {std::clamp(x0, 0, w), std::clamp(y0, 0, h), std::clamp(x1, 0, w), std::clamp(y1, 0, h)};
}

void DepthExtractor::validate(double c, int g_f) {
  if (g_f % 2 == 0 || g_f < kMinFilter || g_f > kMaxFilter) {
    throw ConfigError("G_f must be odd and within [11, 91], got " + std::to_string(g_f), "g_f");
  }
  if (!(c >= 5.0 && c <= 20.0)) throw ConfigError("C must lie within [5, 20]", "c");
}

DepthExtractor::DepthExtractor(const DsiSummary& summary, const PixelRect* roi) : summary_(&summary) {
  const int w = summary.confidence.width(), h = summary.confidence.height();
  roi_ = roi ? roi->clipped(w, h) : PixelRect{0, 0, w, h};
  work_ = roi_.grown(kMaxFilter).clipped(w, h);
  confidence_ = Grid<float>(w, h, 0.0f);
  for (std::size_t i = 0; i < confidence_.size(); ++i) {
    confidence_.data()[i] = static_cast<float>(summary.confidence.data()[i]);
  }
}

const Grid<float>& DepthExtractor::local_mean(int g_f) {
  auto it = mean_cache_.find(g_f);
  if (it != mean_cache_.end()) return it->second;
  const int w = confidence_.width(), h = confidence_.height();
  Grid<float> mean(w, h, 0.0f);
  if (!work_.empty()) {
    cv::Mat full(h, w, CV_32F, confidence_.data());
    cv::Mat dst(h, w, CV_32F, mean.data());
    const cv::Rect r(work_.x0, work_.y0, work_.x1 - work_.x0, work_.y1 - work_.y0);
    // Filtering a view lets OpenCV read real pixels beyond the ROI, so the
    // result matches a full-frame blur inside it.
    cv::Mat out;
    cv::GaussianBlur(full(r), out, cv::Size(g_f, g_f), g_f / 6.0, g_f / 6.0, cv::BORDER_REPLICATE);
    out.copyTo(dst(r));
  }
  return mean_cache_.emplace(g_f, std::move(mean)).first->second;
}

DepthMap DepthExtractor::extract(double c, int g_f) {
  validate(c, g_f);
  const int w = confidence_.width(), h = confidence_.height();
  const int rad = g_f / 2;
  const Grid<float>& mean = local_mean(g_f);
  const auto& depths = summary_->depths;

  DepthMap out(w, h);
  out.reference = summary_->reference;
  if (roi_.empty()) return out;

  const PixelRect zone = roi_.grown(rad).clipped(w, h);
  std::vector<std::vector<int>> row_valid(static_cast<std::size_t>(h));
  for (int y = zone.y0; y < zone.y1; ++y) {
    const float* cr = confidence_.row(y);
    const float* mr = mean.row(y);
    for (int x = zone.x0; x < zone.x1; ++x) {
      if (static_cast<double>(cr[x]) > static_cast<double>(mr[x]) + c) row_valid[y].push_back(x);
    }
  }

  std::vector<std::uint16_t> vals;
  for (int y = roi_.y0; y < roi_.y1; ++y) {
    const auto& self = row_valid[y];
    for (int x : self) {
      if (x < roi_.x0 || x >= roi_.x1) continue;
      vals.clear();
      for (int yy = std::max(zone.y0, y - rad); yy < std::min(zone.y1, y + rad + 1); ++yy) {
        const auto& rv = row_valid[yy];
        auto lo = std::lower_bound(rv.begin(), rv.end(), x - rad);
        for (auto it = lo; it != rv.end() && *it <= x + rad; ++it) vals.push_back(summary_->argmax(*it, yy));
      }
      const auto mid = vals.begin() + static_cast<std::ptrdiff_t>((vals.size() - 1) / 2);
      std::nth_element(vals.begin(), mid, vals.end());
      out.set(x, y, depths[*mid]);
    }
  }
  return out;
}

DepthMap extract_depth(const DsiSummary& summary, double c, int g_f) { return DepthExtractor(summary).extract(c, g_f); }

DepthMap extract_depth(const Dsi& dsi, double c, int g_f) {
  const DsiSummary s = summarize(dsi);
  return extract_depth(s, c, g_f);
}

}  // namespace evtac
