#include "layerfuse/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace layerfuse {

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  const Mat3 err = r * r.transpose() - Mat3::Identity();
  if (err.cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

double rotation_angle(const Mat3& r) {
  // The trace form loses precision near 0 and pi; the quaternion form does not.
  const Eigen::Quaterniond q(r);
  const double v = q.vec().norm();
  return 2.0 * std::atan2(v, std::abs(q.w()));
}

RigidPose RigidPose::inverse() const {
  RigidPose out;
  out.rotation = rotation.transpose();
  out.translation = -(out.rotation * translation);
  return out;
}

RigidPose RigidPose::operator*(const RigidPose& other) const {
  RigidPose out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

Sim3Transform Sim3Transform::inverse() const {
  Sim3Transform out;
  out.scale = 1.0 / scale;
  out.rotation = rotation.transpose();
  out.translation = -(out.scale * (out.rotation * translation));
  return out;
}

Sim3Transform Sim3Transform::operator*(const Sim3Transform& other) const {
  Sim3Transform out;
  out.scale = scale * other.scale;
  out.rotation = rotation * other.rotation;
  out.translation = scale * (rotation * other.translation) + translation;
  return out;
}

bool Sim3Transform::valid() const {
  return std::isfinite(scale) && scale > 0.0 && is_rotation(rotation, 1e-6) &&
         translation.allFinite();
}

PointMap::PointMap(int height, int width) : height_(height), width_(width) {
  if (height < 1 || width < 1) throw std::invalid_argument("PointMap: empty dimensions");
  xyz_.assign(3 * size(), 0.0f);
  valid_.assign(size(), 0);
}

void PointMap::set_point(std::size_t idx, const Vec3& p) {
  float* dst = &xyz_[3 * idx];
  dst[0] = static_cast<float>(p.x());
  dst[1] = static_cast<float>(p.y());
  dst[2] = static_cast<float>(p.z());
}

void PointMap::mask_non_finite() {
  for (std::size_t i = 0; i < size(); ++i) {
    const float* p = &xyz_[3 * i];
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) valid_[i] = 0;
  }
}

ConfidenceMap::ConfidenceMap(int height, int width, float fill)
    : height_(height), width_(width) {
  if (height < 1 || width < 1) throw std::invalid_argument("ConfidenceMap: empty dimensions");
  values_.assign(static_cast<std::size_t>(height) * width, fill);
}

RigidPose compose_world_pose(const Sim3Transform& reg, const RigidPose& local) {
  RigidPose out;
  out.rotation = reg.rotation * local.rotation;
  out.translation = reg.scale * (reg.rotation * local.translation) + reg.translation;
  return out;
}

Vec3 apply_sim3(const Sim3Transform& reg, const Vec3& p) { return reg.apply(p); }

namespace {

template <typename Fn>
PointMap map_valid_points(const PointMap& pm, Fn&& fn) {
  PointMap out = pm;
  for (std::size_t i = 0; i < pm.size(); ++i) {
    if (pm.valid(i)) out.set_point(i, fn(pm.point(i)));
  }
  return out;
}

}  // namespace

PointMap transform_pointmap(const RigidPose& pose, const PointMap& pm) {
  return map_valid_points(pm, [&](const Vec3& p) { return pose.apply(p); });
}

PointMap transform_pointmap(const Sim3Transform& reg, const PointMap& pm) {
  return map_valid_points(pm, [&](const Vec3& p) { return reg.apply(p); });
}

}  // namespace layerfuse
