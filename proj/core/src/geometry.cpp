#include "evtac/geometry.hpp"

#include <cmath>
#include <string>

#include "evtac/errors.hpp"

namespace evtac {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("focal lengths must be positive", "fx/fy");
  if (width <= 0 || height <= 0) throw ConfigError("resolution must be positive", "width/height");
  if (!(cx >= 0.0 && cx < width)) throw ConfigError("principal point outside sensor", "cx");
  if (!(cy >= 0.0 && cy < height)) throw ConfigError("principal point outside sensor", "cy");
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

PoseSE3::PoseSE3(const Quat& q, const Vec3& t, TimeUs timestamp_us)
    : q_(q.normalized()), t_(t), timestamp_us_(timestamp_us) {}

PoseSE3::PoseSE3(const Mat3& r, const Vec3& t, TimeUs timestamp_us)
    : q_(Quat(r).normalized()), t_(t), timestamp_us_(timestamp_us) {}

PoseSE3 PoseSE3::from_translation(double x, double y, double z, TimeUs timestamp_us) {
  return PoseSE3(Quat::Identity(), Vec3(x, y, z), timestamp_us);
}

PoseSE3 PoseSE3::from_matrix(const Mat4& m, TimeUs timestamp_us) {
  // Project the rotation block onto SO(3) so slightly noisy config matrices
  // still produce a proper rotation.
  Eigen::JacobiSVD<Mat3> svd(m.topLeftCorner<3, 3>(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return PoseSE3(r, m.topRightCorner<3, 1>(), timestamp_us);
}

Mat4 PoseSE3::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation();
  m.topRightCorner<3, 1>() = t_;
  return m;
}

PoseSE3 PoseSE3::operator*(const PoseSE3& rhs) const {
  return PoseSE3(q_ * rhs.q_, q_ * rhs.t_ + t_, timestamp_us_);
}

PoseSE3 PoseSE3::inverse() const {
  const Quat qi = q_.conjugate();
  return PoseSE3(qi, -(qi * t_), timestamp_us_);
}

PixelPoint project(const WorldPoint& p, const CameraIntrinsics& k) {
  if (!(p.z() > 0.0)) {
    throw InvalidInputError("cannot project a point with non-positive depth z=" + std::to_string(p.z()));
  }
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

WorldPoint back_project(const PixelPoint& px, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0)) {
    throw InvalidInputError("back-projection depth must be positive, got " + std::to_string(depth));
  }
  return {depth * (px.u - k.cx) / k.fx, depth * (px.v - k.cy) / k.fy, depth};
}

WorldPoint transform_point(const WorldPoint& p, const PoseSE3& t) { return t.apply(p); }

PoseSE3 relative_pose(const PoseSE3& t_m, const PoseSE3& t_i) {
  return (t_m.inverse() * t_i).with_timestamp(t_i.timestamp());
}

PoseSE3 hand_eye_compose(const PoseSE3& t_be, const PoseSE3& t_ec) { return t_be * t_ec; }

}  // namespace evtac
