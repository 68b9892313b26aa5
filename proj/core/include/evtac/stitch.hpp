#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "evtac/depth_map.hpp"
#include "evtac/geometry.hpp"
#include "evtac/surface.hpp"

namespace evtac {

struct PointCloud {
  std::vector<Vec3> points;   // mm
  std::vector<double> scalar;  // one per point (depth along the optical axis by default)

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void append(const PointCloud& other);
  PointCloud transformed(const PoseSE3& t) const;
};

/// One point per valid pixel, back-projected and posed into the base frame.
/// Throws InvalidInputError when the map has no valid pixel.
PointCloud depth_to_cloud(const DepthMap& z, const CameraIntrinsics& k, const PoseSE3& pose);

struct IcpOptions {
  double trim_quantile = 0.9;       // keep pairs at or below this distance quantile
  double max_correspondence_mm = 1.0;
  double rms_tolerance_mm = 1e-4;
  int max_iterations = 50;
  std::size_t min_correspondences = 10;
};

struct AlignmentResult {
  PoseSE3 transform;  // maps src points onto dst
  double rms_mm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::size_t correspondences = 0;
};

/// Trimmed point-to-point ICP refining `init`. Steps that would raise the RMS
/// residual are rejected and end the iteration. Throws AlignmentError when
/// fewer than `min_correspondences` pairs are found.
AlignmentResult icp_align(const PointCloud& src, const PointCloud& dst, const PoseSE3& init,
                          const IcpOptions& opt = {});

/// Averages the points (and scalars) falling in each voxel of side `voxel_mm`.
/// Output is ordered by voxel index.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel_mm);

struct StitchOptions {
  bool use_icp = true;
  IcpOptions icp;
  double voxel_mm = 0.05;  // <= 0 disables downsampling
  int threads = 0;
};

struct StitchResult {
  PointCloud cloud;                          // base frame
  std::vector<PoseSE3> poses;                // refined camera pose per window
  std::vector<AlignmentResult> alignments;   // one per window after the first
};

/// Chains ICP over consecutive windows. Each window's prior is the previous
/// refined pose composed with the relative motion between their reference
/// poses (v * dt along the rolling direction for a constant-speed scan).
/// Maps must carry their reference pose; windows without valid pixels are skipped.
StitchResult assemble(std::span<const DepthMap> maps, const CameraIntrinsics& k, const StitchOptions& opt = {});

struct RegionStats {
  int region = -1;  // -1: plate outside every structural element
  std::size_t n_points = 0;
  double mean_depth_mm = 0.0;
  double std_depth_mm = 0.0;
  double mae_mm = 0.0;
};

struct SurfaceMetrics {
  double mae_mm = 0.0;
  double rmse_mm = 0.0;
  double std_mm = 0.0;  // standard deviation of the signed error
  std::size_t n_points = 0;
  std::vector<RegionStats> regions;  // ascending region index
};

/// Compares every point's Z with the membrane depth of `gt` at its (X, Y).
/// Throws UndefinedMetricError for an empty cloud.
SurfaceMetrics evaluate_surface(const PointCloud& cloud, const SurfaceModel& gt);

/// ASCII PLY with float properties x, y, z, scalar.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_ply(const std::filesystem::path& path);

}  // namespace evtac
