#include <algorithm>
#include <string>

#include "evtac/errors.hpp"
#include "evtac/geometry.hpp"

namespace evtac {

Trajectory::Trajectory(std::vector<PoseSE3> samples) : samples_(std::move(samples)) {
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    if (samples_[i].timestamp() <= samples_[i - 1].timestamp()) {
      throw DataError("trajectory timestamps must be strictly increasing (sample " + std::to_string(i) + ")");
    }
  }
}

TimeUs Trajectory::begin_time() const {
  if (samples_.empty()) throw OutOfRangeError("empty trajectory");
  return samples_.front().timestamp();
}

TimeUs Trajectory::end_time() const {
  if (samples_.empty()) throw OutOfRangeError("empty trajectory");
  return samples_.back().timestamp();
}

bool Trajectory::covers(TimeUs t) const {
  return !samples_.empty() && t >= samples_.front().timestamp() && t <= samples_.back().timestamp();
}

PoseSE3 Trajectory::at(TimeUs t) const {
  if (!covers(t)) {
    throw OutOfRangeError("time " + std::to_string(t) + " us outside trajectory span");
  }
  auto hi = std::lower_bound(samples_.begin(), samples_.end(), t,
                             [](const PoseSE3& p, TimeUs v) { return p.timestamp() < v; });
  if (hi->timestamp() == t) return *hi;
  auto lo = hi - 1;
  const double alpha = static_cast<double>(t - lo->timestamp()) /
                       static_cast<double>(hi->timestamp() - lo->timestamp());
  const Vec3 trans = (1.0 - alpha) * lo->translation() + alpha * hi->translation();
  const Quat rot = lo->quaternion().slerp(alpha, hi->quaternion());
  return PoseSE3(rot, trans, t);
}

Trajectory Trajectory::compose_right(const PoseSE3& t) const {
  std::vector<PoseSE3> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s * t);
  return Trajectory(std::move(out));
}

PoseSE3 interpolate_pose(const Trajectory& trajectory, TimeUs t) { return trajectory.at(t); }

}  // namespace evtac
