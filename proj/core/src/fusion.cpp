#include "evtac/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "evtac/errors.hpp"

namespace evtac {

void FusionWeights::validate() const {
  for (double w : as_array()) {
    if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("fusion weights must lie in [0, 1]", "weights");
  }
  if (std::abs(w_s + w_m + w_e - 1.0) > 1e-9) throw ConfigError("fusion weights must sum to 1", "weights");
}

WarpedDepthMap warp_depth(const DepthMap& z_i, const PoseSE3& t_i, const PoseSE3& t_m, const CameraIntrinsics& k) {
  const int w = z_i.width(), h = z_i.height();
  WarpedDepthMap out;
  out.map = DepthMap(w, h);
  out.map.reference = t_m;
  out.map.t_start = z_i.t_start;
  out.map.t_end = z_i.t_end;
  out.source_time = t_i.timestamp();
  const PoseSE3 m_t_i = relative_pose(t_m, t_i);
  const Mat3 r = m_t_i.rotation();
  const Vec3 t = m_t_i.translation();
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (!z_i.is_valid(u, v)) continue;
      const double d = z_i.depth(u, v);
      if (!(d > 0.0)) throw InvalidInputError("valid source pixels must have positive depth");
      const Vec3 p = r * back_project({static_cast<double>(u), static_cast<double>(v)}, d, k) + t;
      if (!(p.z() > 0.0)) {
        ++out.dropped;
        continue;
      }
      const PixelPoint q = project(p, k);
      const double fu = std::floor(q.u + 0.5), fv = std::floor(q.v + 0.5);
      if (fu < 0.0 || fv < 0.0 || fu >= w || fv >= h) {
        ++out.dropped;
        continue;
      }
      const int x = static_cast<int>(fu), y = static_cast<int>(fv);
      if (!out.map.is_valid(x, y) || p.z() < out.map.depth(x, y)) out.map.set(x, y, p.z());
    }
  }
  return out;
}

DepthMap fuse_weighted(std::span<const DepthMap* const> maps, std::span<const double> weights) {
  if (maps.empty() || maps.size() != weights.size()) throw ConfigError("need one weight per depth map", "weights");
  const int w = maps[0]->width(), h = maps[0]->height();
  for (const DepthMap* m : maps) {
    if (m->width() != w || m->height() != h) throw ConfigError("depth maps differ in resolution", "maps");
  }
  for (double wt : weights) {
    if (!(wt >= 0.0)) throw ConfigError("fusion weights must be non-negative", "weights");
  }
  DepthMap out(w, h);
  out.reference = maps[0]->reference;
  out.t_start = maps[0]->t_start;
  out.t_end = maps[0]->t_end;
  for (const DepthMap* m : maps) {
    out.t_start = std::min(out.t_start, m->t_start);
    out.t_end = std::max(out.t_end, m->t_end);
  }
  const std::size_t n = maps.size();
  std::vector<double> d(n);
  std::unique_ptr<bool[]> valid(new bool[n]);
  for (std::size_t i = 0; i < out.depth.size(); ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      valid[j] = maps[j]->valid.data()[i] != 0;
      d[j] = maps[j]->depth.data()[i];
    }
    double z = 0.0;
    if (fuse_pixel(d, std::span<const bool>(valid.get(), n), weights, z)) {
      out.depth.data()[i] = z;
      out.valid.data()[i] = 1;
    }
  }
  return out;
}

DepthMap fuse_bma(const std::array<const DepthMap*, 3>& maps, const FusionWeights& w) {
  w.validate();
  const auto weights = w.as_array();
  return fuse_weighted(maps, weights);
}

DepthMap fuse_bma(const WarpedDepthMap& s, const WarpedDepthMap& m, const WarpedDepthMap& e, const FusionWeights& w) {
  return fuse_bma({&s.map, &m.map, &e.map}, w);
}

DepthMap fuse_left_right(const DepthMap& s, const DepthMap& e) {
  const std::array<const DepthMap*, 2> maps{&s, &e};
  const std::array<double, 2> weights{0.5, 0.5};
  return fuse_weighted(maps, weights);
}

DepthMap fuse_left_right(const WarpedDepthMap& s, const WarpedDepthMap& e) { return fuse_left_right(s.map, e.map); }

}  // namespace evtac
