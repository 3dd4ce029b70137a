#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>
#include <string>
#include <vector>

#include "wfm/errors.hpp"

namespace wfm {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Pinhole camera intrinsics, in pixels.
struct Intrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  Intrinsics() = default;
  Intrinsics(double fx, double fy, double cx, double cy, int width, int height);

  bool contains(const Vec2& px) const {
    return px.x() >= 0.0 && px.x() < width && px.y() >= 0.0 && px.y() < height;
  }
};

/// Rigid world-to-camera transform: x_cam = rotation * x_world + translation.
///
/// This convention is fixed library-wide; rotations are stored as matrices
/// and validated to be proper (orthonormal, det +1) on construction.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Pose() = default;
  Pose(const Mat3& rotation, const Vec3& translation);

  static Pose identity() { return {}; }
  static Pose from_quaternion(const Quat& q, const Vec3& translation);

  /// Camera position in world coordinates, -Rᵀ·T.
  Vec3 center() const { return -(rotation.transpose() * translation); }

  Vec3 to_camera(const Vec3& p_world) const {
    return rotation * p_world + translation;
  }
  Vec3 to_world(const Vec3& p_cam) const {
    return rotation.transpose() * (p_cam - translation);
  }

  /// Composition: (a * b).to_camera(p) == a.to_camera(b.to_camera(p)).
  Pose operator*(const Pose& other) const;
  Pose inverse() const;
};

struct TrajectoryFrame {
  double timestamp = 0.0;  // seconds
  Pose pose;
};

/// Ordered per-frame camera poses of one view, with shared intrinsics.
struct Trajectory {
  std::string view_id;
  std::vector<TrajectoryFrame> frames;
  Intrinsics intrinsics;

  /// Throws InvalidArgument unless timestamps strictly increase and the
  /// trajectory has at least one frame.
  void validate() const;
  size_t size() const { return frames.size(); }
};

/// Metric 3D points with optional per-point confidences in [0,1].
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<double> confidence;  // empty, or same length as points

  void validate() const;
  size_t size() const { return points.size(); }
};

/// Similarity transform p ↦ scale · rotation · p + translation.
struct SimilarityTransform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  SimilarityTransform() = default;
  SimilarityTransform(double scale, const Mat3& rotation, const Vec3& translation);

  static SimilarityTransform identity() { return {}; }

  SimilarityTransform inverse() const;
  /// Composition: (a.compose(b))(p) == a(b(p)).
  SimilarityTransform compose(const SimilarityTransform& other) const;
};

inline Vec3 apply_similarity(const SimilarityTransform& t, const Vec3& p) {
  return t.scale * (t.rotation * p) + t.translation;
}

/// Perspective projection of a world point into pixel coordinates.
/// Throws BehindCamera if the camera-frame depth is ≤ 1e-9.
Vec2 project(const Vec3& p_world, const Pose& pose, const Intrinsics& k);

/// Inverse of project for a known depth (camera-frame z, meters).
/// Throws NonPositiveDepth.
Vec3 backproject(const Vec2& px, double depth, const Pose& pose, const Intrinsics& k);

/// Rotation by `angle` radians about the world z axis.
Mat3 yaw_rotation(double angle);

/// d/dangle of yaw_rotation.
Mat3 yaw_rotation_derivative(double angle);

/// Wrap an angle to (-pi, pi].
double wrap_angle(double angle);

/// Rodrigues: axis-angle vector to rotation matrix (stable near zero).
Mat3 axis_angle_to_matrix(const Vec3& axis_angle);

/// Log map: rotation matrix to axis-angle with magnitude in [0, pi].
Vec3 matrix_to_axis_angle(const Mat3& rotation);

/// Partial derivative of axis_angle_to_matrix w.r.t. component `i`.
Mat3 axis_angle_jacobian(const Vec3& axis_angle, int i);

/// True if ‖RᵀR - I‖ < tol and det(R) > 0.
bool is_rotation(const Mat3& r, double tol = 1e-9);

}  // namespace wfm
