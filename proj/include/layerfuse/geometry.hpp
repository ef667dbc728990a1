#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace layerfuse {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// True when `r` is orthonormal with determinant +1 (entry-wise tolerance).
bool is_rotation(const Mat3& r, double tol = 1e-9);

/// Rotation about a unit axis by `angle` radians.
Mat3 axis_angle(const Vec3& axis, double angle);

/// Angle of a rotation matrix in radians, in [0, pi].
double rotation_angle(const Mat3& r);

/// Camera-to-frame rigid transform. Applied to a point as R·p + t.
struct RigidPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidPose identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidPose inverse() const;
  /// (this ∘ other): apply `other` first.
  RigidPose operator*(const RigidPose& other) const;
};

/// Similarity transform, applied to a point as s·R·p + t.
struct Sim3Transform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Sim3Transform identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
  Sim3Transform inverse() const;
  /// (this ∘ other): apply `other` first.
  Sim3Transform operator*(const Sim3Transform& other) const;
  bool valid() const;
};

/// Dense H×W grid of 3D points with a validity mask. Storage is float32;
/// accessors widen to double.
class PointMap {
 public:
  PointMap() = default;
  PointMap(int height, int width);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return static_cast<std::size_t>(height_) * width_; }

  Vec3 point(std::size_t idx) const {
    const float* p = &xyz_[3 * idx];
    return {p[0], p[1], p[2]};
  }
  void set_point(std::size_t idx, const Vec3& p);
  bool valid(std::size_t idx) const { return valid_[idx] != 0; }
  void set_valid(std::size_t idx, bool v) { valid_[idx] = v ? 1 : 0; }

  std::vector<float>& raw_points() { return xyz_; }
  const std::vector<float>& raw_points() const { return xyz_; }
  std::vector<std::uint8_t>& raw_validity() { return valid_; }
  const std::vector<std::uint8_t>& raw_validity() const { return valid_; }

  /// Clears the validity bit of every pixel with non-finite coordinates.
  void mask_non_finite();

  bool operator==(const PointMap&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> xyz_;
  std::vector<std::uint8_t> valid_;
};

/// Per-pixel non-negative confidence, same grid as its PointMap.
class ConfidenceMap {
 public:
  ConfidenceMap() = default;
  ConfidenceMap(int height, int width, float fill = 0.0f);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }
  float operator[](std::size_t idx) const { return values_[idx]; }
  float& operator[](std::size_t idx) { return values_[idx]; }
  std::vector<float>& raw() { return values_; }
  const std::vector<float>& raw() const { return values_; }

  bool operator==(const ConfidenceMap&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> values_;
};

/// World pose induced by a window registration: (R_w·R, s·R_w·t + t_w).
RigidPose compose_world_pose(const Sim3Transform& reg, const RigidPose& local);

Vec3 apply_sim3(const Sim3Transform& reg, const Vec3& p);

/// Applies `pose` to every valid pixel; the validity mask is unchanged.
PointMap transform_pointmap(const RigidPose& pose, const PointMap& pm);

/// Applies a similarity to every valid pixel; the validity mask is unchanged.
PointMap transform_pointmap(const Sim3Transform& reg, const PointMap& pm);

}  // namespace layerfuse
