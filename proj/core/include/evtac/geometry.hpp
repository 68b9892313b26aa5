#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace evtac {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Quat = Eigen::Quaterniond;

/// Lengths are millimetres, timestamps microseconds, throughout the library.
using TimeUs = std::int64_t;

struct CameraIntrinsics {
  double fx = 600.0;
  double fy = 600.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  /// Throws ConfigError when the invariants fx, fy > 0 and the principal
  /// point inside the sensor do not hold.
  void validate() const;
  Mat3 matrix() const;
  /// mm covered by one pixel at the given depth.
  double mm_per_pixel(double depth_mm) const { return depth_mm / fx; }
};

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
};

/// A 3D point in mm. Which frame it lives in is a property of the call site.
using WorldPoint = Vec3;

/// Rigid transform with a timestamp. Rotation is stored as a unit quaternion;
/// `rotation()` materialises the matrix on demand.
class PoseSE3 {
 public:
  PoseSE3() = default;
  PoseSE3(const Quat& q, const Vec3& t, TimeUs timestamp_us = 0);
  PoseSE3(const Mat3& r, const Vec3& t, TimeUs timestamp_us = 0);

  static PoseSE3 identity(TimeUs timestamp_us = 0) { return PoseSE3(Quat::Identity(), Vec3::Zero(), timestamp_us); }
  static PoseSE3 from_translation(double x, double y, double z, TimeUs timestamp_us = 0);
  /// Accepts a homogeneous 4x4 matrix; the rotation block is re-orthonormalised.
  static PoseSE3 from_matrix(const Mat4& m, TimeUs timestamp_us = 0);

  const Quat& quaternion() const noexcept { return q_; }
  Mat3 rotation() const { return q_.toRotationMatrix(); }
  const Vec3& translation() const noexcept { return t_; }
  TimeUs timestamp() const noexcept { return timestamp_us_; }
  PoseSE3 with_timestamp(TimeUs t) const { return PoseSE3(q_, t_, t); }
  Mat4 matrix() const;

  Vec3 apply(const Vec3& p) const { return q_ * p + t_; }
  /// Composition keeps the timestamp of the left operand.
  PoseSE3 operator*(const PoseSE3& rhs) const;
  PoseSE3 inverse() const;

 private:
  Quat q_ = Quat::Identity();
  Vec3 t_ = Vec3::Zero();
  TimeUs timestamp_us_ = 0;
};

/// u = fx x/z + cx, v = fy y/z + cy. Throws InvalidInputError for z <= 0.
PixelPoint project(const WorldPoint& p_camera, const CameraIntrinsics& k);

/// depth * K^-1 [u v 1]^T. Throws InvalidInputError for depth <= 0.
WorldPoint back_project(const PixelPoint& px, double depth, const CameraIntrinsics& k);

WorldPoint transform_point(const WorldPoint& p, const PoseSE3& t);

/// m_T_i = (T_m)^-1 * T_i: maps points from frame i into frame m.
PoseSE3 relative_pose(const PoseSE3& t_m, const PoseSE3& t_i);

/// B_T_C = B_T_E * E_T_C.
PoseSE3 hand_eye_compose(const PoseSE3& t_be, const PoseSE3& t_ec);

/// Time-sorted pose samples with constant-velocity interpolation between them.
class Trajectory {
 public:
  Trajectory() = default;
  /// Samples must have strictly increasing timestamps (DataError otherwise).
  explicit Trajectory(std::vector<PoseSE3> samples);

  bool empty() const noexcept { return samples_.empty(); }
  std::size_t size() const noexcept { return samples_.size(); }
  const std::vector<PoseSE3>& samples() const noexcept { return samples_; }
  TimeUs begin_time() const;
  TimeUs end_time() const;
  bool covers(TimeUs t) const;
  bool covers(TimeUs t0, TimeUs t1) const { return covers(t0) && covers(t1); }

  /// Interpolated pose at t; OutOfRangeError outside [begin_time, end_time].
  PoseSE3 at(TimeUs t) const;

  /// Every sample composed on the right with `t` (e.g. B_T_E -> B_T_C).
  Trajectory compose_right(const PoseSE3& t) const;

 private:
  std::vector<PoseSE3> samples_;
};

/// Linear translation / slerp rotation between the two samples bracketing t.
PoseSE3 interpolate_pose(const Trajectory& trajectory, TimeUs t);

}  // namespace evtac
