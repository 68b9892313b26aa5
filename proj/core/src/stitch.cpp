#include "evtac/stitch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <tuple>

#include <Eigen/Geometry>
#include <opencv2/flann.hpp>

#include "evtac/errors.hpp"
#include "evtac/parallel.hpp"

namespace evtac {
namespace {

using KdIndex = cvflann::Index<cvflann::L2_Simple<float>>;

// Exact nearest-neighbour lookup over a fixed cloud.
class NearestNeighbour {
 public:
  explicit NearestNeighbour(const PointCloud& cloud) : data_(cloud.size() * 3) {
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      for (int d = 0; d < 3; ++d) data_[i * 3 + d] = static_cast<float>(cloud.points[i][d]);
    }
    matrix_ = cvflann::Matrix<float>(data_.data(), cloud.size(), 3);
    index_ = std::make_unique<KdIndex>(matrix_, cvflann::KDTreeSingleIndexParams(10));
    index_->buildIndex();
  }

  // Index of the nearest stored point for every query.
  std::vector<int> query(const std::vector<Vec3>& pts) const {
    std::vector<float> q(pts.size() * 3);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (int d = 0; d < 3; ++d) q[i * 3 + d] = static_cast<float>(pts[i][d]);
    }
    std::vector<int> idx(pts.size());
    std::vector<float> dist(pts.size());
    cvflann::Matrix<float> qm(q.data(), pts.size(), 3);
    cvflann::Matrix<int> im(idx.data(), pts.size(), 1);
    cvflann::Matrix<float> dm(dist.data(), pts.size(), 1);
    index_->knnSearch(qm, im, dm, 1, cvflann::SearchParams(-1, 0.0f));
    return idx;
  }

 private:
  std::vector<float> data_;
  cvflann::Matrix<float> matrix_;
  std::unique_ptr<KdIndex> index_;
};

struct Pairs {
  std::vector<Vec3> src, dst;
  double rms = 0.0;
};

Pairs correspond(const std::vector<Vec3>& moved, const PointCloud& dst, const NearestNeighbour& nn,
                 const IcpOptions& opt) {
  const std::vector<int> idx = nn.query(moved);
  std::vector<double> dist(moved.size());
  for (std::size_t i = 0; i < moved.size(); ++i) dist[i] = (moved[i] - dst.points[static_cast<std::size_t>(idx[i])]).norm();

  std::vector<double> within;
  within.reserve(dist.size());
  for (double d : dist) {
    if (d <= opt.max_correspondence_mm) within.push_back(d);
  }
  Pairs p;
  if (within.empty()) return p;
  const std::size_t q = static_cast<std::size_t>(std::ceil(opt.trim_quantile * within.size())) - 1;
  std::nth_element(within.begin(), within.begin() + static_cast<std::ptrdiff_t>(std::min(q, within.size() - 1)),
                   within.end());
  const double cut = within[std::min(q, within.size() - 1)];
  double ss = 0.0;
  for (std::size_t i = 0; i < moved.size(); ++i) {
    if (dist[i] > opt.max_correspondence_mm || dist[i] > cut) continue;
    p.src.push_back(moved[i]);
    p.dst.push_back(dst.points[static_cast<std::size_t>(idx[i])]);
    ss += dist[i] * dist[i];
  }
  p.rms = p.src.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(p.src.size()));
  return p;
}

// Least-squares rigid motion taking a onto b (Kabsch via Eigen's Umeyama).
PoseSE3 rigid_fit(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  Eigen::Matrix3Xd ma(3, a.size()), mb(3, b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma.col(static_cast<Eigen::Index>(i)) = a[i];
    mb.col(static_cast<Eigen::Index>(i)) = b[i];
  }
  const Mat4 t = Eigen::umeyama(ma, mb, false);
  return PoseSE3(Mat3(t.block<3, 3>(0, 0)), Vec3(t.block<3, 1>(0, 3)));
}

}  // namespace

void PointCloud::append(const PointCloud& other) {
  points.insert(points.end(), other.points.begin(), other.points.end());
  scalar.insert(scalar.end(), other.scalar.begin(), other.scalar.end());
}

PointCloud PointCloud::transformed(const PoseSE3& t) const {
  PointCloud out;
  out.points.reserve(points.size());
  for (const Vec3& p : points) out.points.push_back(t.apply(p));
  out.scalar = scalar;
  return out;
}

PointCloud depth_to_cloud(const DepthMap& z, const CameraIntrinsics& k, const PoseSE3& pose) {
  PointCloud c;
  for (int y = 0; y < z.height(); ++y) {
    for (int x = 0; x < z.width(); ++x) {
      if (!z.is_valid(x, y)) continue;
      const double d = z.depth(x, y);
      c.points.push_back(pose.apply(back_project({static_cast<double>(x), static_cast<double>(y)}, d, k)));
      c.scalar.push_back(d);
    }
  }
  if (c.empty()) throw InvalidInputError("depth map has no valid pixel");
  return c;
}

AlignmentResult icp_align(const PointCloud& src, const PointCloud& dst, const PoseSE3& init, const IcpOptions& opt) {
  if (src.empty() || dst.empty()) throw AlignmentError("cannot align an empty cloud");
  if (!(opt.trim_quantile > 0.0 && opt.trim_quantile <= 1.0)) {
    throw ConfigError("trim quantile must lie in (0, 1]", "icp.trim_quantile");
  }
  const NearestNeighbour nn(dst);
  AlignmentResult best;
  PoseSE3 t = init;
  std::vector<Vec3> moved(src.size());
  for (int it = 0; it < opt.max_iterations; ++it) {
    for (std::size_t i = 0; i < src.size(); ++i) moved[i] = t.apply(src.points[i]);
    const Pairs p = correspond(moved, dst, nn, opt);
    if (p.src.size() < opt.min_correspondences) {
      if (it == 0) {
        throw AlignmentError("only " + std::to_string(p.src.size()) + " correspondences within " +
                             std::to_string(opt.max_correspondence_mm) + " mm");
      }
      break;
    }
    if (it > 0 && p.rms > best.rms_mm) {
      // A rise below the tolerance is numerical noise at the minimum.
      best.converged = p.rms - best.rms_mm < opt.rms_tolerance_mm;
      break;
    }
    const double change = it > 0 ? best.rms_mm - p.rms : std::numeric_limits<double>::infinity();
    best.transform = t;
    best.rms_mm = p.rms;
    best.iterations = it + 1;
    best.correspondences = p.src.size();
    if (change < opt.rms_tolerance_mm) {
      best.converged = true;
      break;
    }
    t = rigid_fit(p.src, p.dst) * t;
  }
  best.transform = best.transform.with_timestamp(init.timestamp());
  return best;
}

PointCloud voxel_downsample(const PointCloud& cloud, double voxel_mm) {
  if (!(voxel_mm > 0.0)) return cloud;
  struct Acc {
    Vec3 sum = Vec3::Zero();
    double s = 0.0;
    std::size_t n = 0;
  };
  std::map<std::tuple<long long, long long, long long>, Acc> cells;
  const bool has_scalar = cloud.scalar.size() == cloud.points.size();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const auto key = std::make_tuple(static_cast<long long>(std::floor(p.x() / voxel_mm)),
                                     static_cast<long long>(std::floor(p.y() / voxel_mm)),
                                     static_cast<long long>(std::floor(p.z() / voxel_mm)));
    Acc& a = cells[key];
    a.sum += p;
    if (has_scalar) a.s += cloud.scalar[i];
    ++a.n;
  }
  PointCloud out;
  out.points.reserve(cells.size());
  for (const auto& [key, a] : cells) {
    out.points.push_back(a.sum / static_cast<double>(a.n));
    if (has_scalar) out.scalar.push_back(a.s / static_cast<double>(a.n));
  }
  return out;
}

StitchResult assemble(std::span<const DepthMap> maps, const CameraIntrinsics& k, const StitchOptions& opt) {
  if (maps.empty()) throw InvalidInputError("stitching needs at least one window");
  std::vector<PointCloud> local(maps.size());
  std::vector<std::uint8_t> usable(maps.size(), 0);
  parallel_chunks(maps.size(), resolve_threads(opt.threads), [&](int, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      if (maps[i].valid_count() == 0) continue;
      local[i] = depth_to_cloud(maps[i], k, PoseSE3::identity());
      usable[i] = 1;
    }
  });

  StitchResult res;
  PointCloud prev;
  const DepthMap* prev_map = nullptr;
  PoseSE3 prev_pose;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (!usable[i]) continue;
    PoseSE3 pose = maps[i].reference;
    if (prev_map) {
      const PoseSE3 prior = prev_pose * relative_pose(prev_map->reference, maps[i].reference);
      pose = prior;
      if (opt.use_icp) {
        try {
          const AlignmentResult a = icp_align(local[i], prev, prior, opt.icp);
          pose = a.transform;
          res.alignments.push_back(a);
        } catch (const AlignmentError& e) {
          throw AlignmentError("window " + std::to_string(i) + ": " + e.what());
        }
      }
    }
    pose = pose.with_timestamp(maps[i].reference.timestamp());
    PointCloud posed = local[i].transformed(pose);
    res.cloud.append(posed);
    res.poses.push_back(pose);
    prev = std::move(posed);
    prev_map = &maps[i];
    prev_pose = pose;
  }
  if (res.poses.empty()) throw InvalidInputError("no window has a valid pixel");
  if (opt.voxel_mm > 0.0) res.cloud = voxel_downsample(res.cloud, opt.voxel_mm);
  return res;
}

SurfaceMetrics evaluate_surface(const PointCloud& cloud, const SurfaceModel& gt) {
  if (cloud.empty()) throw UndefinedMetricError("cannot evaluate an empty cloud");
  struct Acc {
    std::size_t n = 0;
    double sum = 0.0, sum2 = 0.0, abs_err = 0.0;
  };
  std::map<int, Acc> regions;
  double abs_sum = 0.0, sq_sum = 0.0, err_sum = 0.0, err_sq = 0.0;
  for (const Vec3& p : cloud.points) {
    if (!p.allFinite()) throw InvalidInputError("cloud contains a non-finite point");
    const double err = p.z() - gt.membrane_depth(p.x(), p.y());
    abs_sum += std::abs(err);
    sq_sum += err * err;
    err_sum += err;
    err_sq += err * err;
    Acc& a = regions[gt.region_at(p.x(), p.y())];
    ++a.n;
    a.sum += p.z();
    a.sum2 += p.z() * p.z();
    a.abs_err += std::abs(err);
  }
  const double n = static_cast<double>(cloud.size());
  SurfaceMetrics m;
  m.n_points = cloud.size();
  m.mae_mm = abs_sum / n;
  m.rmse_mm = std::sqrt(sq_sum / n);
  const double mean_err = err_sum / n;
  m.std_mm = std::sqrt(std::max(0.0, err_sq / n - mean_err * mean_err));
  for (const auto& [region, a] : regions) {
    RegionStats r;
    r.region = region;
    r.n_points = a.n;
    const double rn = static_cast<double>(a.n);
    r.mean_depth_mm = a.sum / rn;
    r.std_depth_mm = std::sqrt(std::max(0.0, a.sum2 / rn - r.mean_depth_mm * r.mean_depth_mm));
    r.mae_mm = a.abs_err / rn;
    m.regions.push_back(r);
  }
  return m;
}

void write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  const bool has_scalar = cloud.scalar.size() == cloud.points.size();
  os << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
     << "\nproperty float x\nproperty float y\nproperty float z\nproperty float scalar\nend_header\n";
  char buf[128];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f %.6f\n", p.x(), p.y(), p.z(), has_scalar ? cloud.scalar[i] : 0.0);
    os << buf;
  }
  if (!os) throw DataError("write failed for " + path.string());
}

PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != "ply") throw DataError(path.string() + ": missing ply magic", 0);
  std::size_t n = 0;
  int props = 0;
  bool ascii = false;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (word == "element") {
      std::string name;
      ls >> name >> n;
    } else if (word == "property") {
      ++props;
    } else if (word == "end_header") {
      break;
    }
  }
  if (!ascii) throw DataError(path.string() + ": only ASCII PLY is supported");
  if (props < 3) throw DataError(path.string() + ": vertex needs x, y, z");
  PointCloud c;
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(static_cast<std::size_t>(props));
    for (auto& x : v) {
      if (!(is >> x)) throw DataError(path.string() + ": truncated vertex list at vertex " + std::to_string(i));
    }
    c.points.emplace_back(v[0], v[1], v[2]);
    c.scalar.push_back(props > 3 ? v[3] : 0.0);
  }
  return c;
}

}  // namespace evtac
