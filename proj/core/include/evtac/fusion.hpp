#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "evtac/depth_map.hpp"
#include "evtac/geometry.hpp"

namespace evtac {

struct FusionWeights {
  double w_s = 0.445;
  double w_m = 0.333;
  double w_e = 0.222;

  /// Throws ConfigError unless every weight is in [0, 1] and they sum to 1 (1e-9).
  void validate() const;
  std::array<double, 3> as_array() const { return {w_s, w_m, w_e}; }
};

struct WarpedDepthMap {
  DepthMap map;             // expressed in the target frame
  TimeUs source_time = 0;   // reference time of the source map
  std::size_t dropped = 0;  // splats that left the image
};

/// Moves every valid pixel of `z_i` (referenced at T_i) into the camera at T_m:
/// back-project, transform by m_T_i, re-project, and splat the frame-m depth at
/// the nearest pixel. Collisions keep the nearest depth.
WarpedDepthMap warp_depth(const DepthMap& z_i, const PoseSE3& t_i, const PoseSE3& t_m, const CameraIntrinsics& k);

/// Weighted average over whichever inputs are valid at each pixel, with the
/// weights renormalised over that subset. Inputs must share a resolution.
DepthMap fuse_weighted(std::span<const DepthMap* const> maps, std::span<const double> weights);

/// Z_f = sum_i w_i W_i(Z_i) over the start, mid and end maps.
DepthMap fuse_bma(const std::array<const DepthMap*, 3>& maps, const FusionWeights& w);
DepthMap fuse_bma(const WarpedDepthMap& s, const WarpedDepthMap& m, const WarpedDepthMap& e, const FusionWeights& w);

/// Equal-weight fusion of the start and end maps.
DepthMap fuse_left_right(const DepthMap& s, const DepthMap& e);
DepthMap fuse_left_right(const WarpedDepthMap& s, const WarpedDepthMap& e);

/// Per-pixel fusion rule shared by the map-level functions and calibration.
/// Returns false when no input is valid.
inline bool fuse_pixel(std::span<const double> depth, std::span<const bool> valid, std::span<const double> weights,
                       double& out) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (!valid[i]) continue;
    num += weights[i] * depth[i];
    den += weights[i];
  }
  if (den <= 0.0) return false;
  out = num / den;
  return true;
}

}  // namespace evtac
