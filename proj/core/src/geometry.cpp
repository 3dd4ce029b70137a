#include "wfm/geometry.hpp"

#include <cmath>

namespace wfm {

namespace {
constexpr double kMinDepth = 1e-9;
}

Intrinsics::Intrinsics(double fx, double fy, double cx, double cy, int width, int height)
    : fx(fx), fy(fy), cx(cx), cy(cy), width(width), height(height) {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("focal lengths must be positive");
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height))
    throw InvalidArgument("principal point must lie inside the image");
}

bool is_rotation(const Mat3& r, double tol) {
  const Mat3 err = r.transpose() * r - Mat3::Identity();
  return err.norm() < tol && r.determinant() > 0.0;
}

Pose::Pose(const Mat3& rotation, const Vec3& translation)
    : rotation(rotation), translation(translation) {
  if (!is_rotation(rotation)) throw InvalidRotation();
  if (!translation.allFinite()) throw InvalidArgument("pose translation not finite");
}

Pose Pose::from_quaternion(const Quat& q, const Vec3& translation) {
  // Near-unit quaternions pass through verbatim; renormalizing them would
  // perturb file round-trips for no precision gain.
  Quat qq = q;
  if (std::abs(qq.squaredNorm() - 1.0) > 1e-9) qq.normalize();
  return Pose(qq.toRotationMatrix(), translation);
}

Pose Pose::operator*(const Pose& other) const {
  Pose out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

Pose Pose::inverse() const {
  Pose out;
  out.rotation = rotation.transpose();
  out.translation = -(rotation.transpose() * translation);
  return out;
}

void Trajectory::validate() const {
  if (frames.empty()) throw InvalidArgument("trajectory has no frames");
  for (size_t i = 1; i < frames.size(); ++i) {
    if (!(frames[i].timestamp > frames[i - 1].timestamp))
      throw InvalidArgument("trajectory timestamps must strictly increase");
  }
}

void PointCloud::validate() const {
  for (const Vec3& p : points)
    if (!p.allFinite()) throw InvalidArgument("point cloud contains non-finite point");
  if (!confidence.empty() && confidence.size() != points.size())
    throw SizeMismatch("confidence length differs from point count");
  for (double c : confidence)
    if (!(c >= 0.0 && c <= 1.0)) throw InvalidArgument("confidence outside [0,1]");
}

SimilarityTransform::SimilarityTransform(double scale, const Mat3& rotation,
                                         const Vec3& translation)
    : scale(scale), rotation(rotation), translation(translation) {
  if (!(scale > 0.0)) throw InvalidArgument("similarity scale must be positive");
  if (!is_rotation(rotation)) throw InvalidRotation();
}

SimilarityTransform SimilarityTransform::inverse() const {
  SimilarityTransform out;
  out.scale = 1.0 / scale;
  out.rotation = rotation.transpose();
  out.translation = -(out.scale * (out.rotation * translation));
  return out;
}

SimilarityTransform SimilarityTransform::compose(const SimilarityTransform& other) const {
  SimilarityTransform out;
  out.scale = scale * other.scale;
  out.rotation = rotation * other.rotation;
  out.translation = scale * (rotation * other.translation) + translation;
  return out;
}

Vec2 project(const Vec3& p_world, const Pose& pose, const Intrinsics& k) {
  const Vec3 p_cam = pose.to_camera(p_world);
  if (!(p_cam.z() > kMinDepth)) throw BehindCamera();
  return {k.fx * p_cam.x() / p_cam.z() + k.cx, k.fy * p_cam.y() / p_cam.z() + k.cy};
}

Vec3 backproject(const Vec2& px, double depth, const Pose& pose, const Intrinsics& k) {
  if (!(depth > 0.0)) throw NonPositiveDepth();
  const Vec3 p_cam(depth * (px.x() - k.cx) / k.fx, depth * (px.y() - k.cy) / k.fy, depth);
  return pose.to_world(p_cam);
}

Mat3 yaw_rotation(double angle) {
  if (!std::isfinite(angle)) throw InvalidArgument("yaw angle not finite");
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

Mat3 yaw_rotation_derivative(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << -s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0;
  return r;
}

double wrap_angle(double angle) {
  const double two_pi = 2.0 * M_PI;
  double a = std::fmod(angle, two_pi);
  if (a <= -M_PI) a += two_pi;
  if (a > M_PI) a -= two_pi;
  return a;
}

namespace {
Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}
}  // namespace

Mat3 axis_angle_to_matrix(const Vec3& aa) {
  const double theta2 = aa.squaredNorm();
  const Mat3 k = skew(aa);
  if (theta2 < 1e-16) {
    // second order series, exact enough below sqrt(1e-16)
    return Mat3::Identity() + k + 0.5 * (k * k);
  }
  const double theta = std::sqrt(theta2);
  return Mat3::Identity() + (std::sin(theta) / theta) * k +
         ((1.0 - std::cos(theta)) / theta2) * (k * k);
}

Vec3 matrix_to_axis_angle(const Mat3& r) {
  if (!is_rotation(r, 1e-6)) throw InvalidRotation();
  const double cos_theta = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  const Vec3 skew_part(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  if (theta < 1e-7) {
    return 0.5 * skew_part;  // small-angle limit
  }
  if (theta > M_PI - 1e-5) {
    // Near pi the skew part vanishes; recover the axis from the symmetric part.
    const Mat3 s = 0.5 * (r + Mat3::Identity());  // = axis·axisᵀ at theta = pi
    Vec3 axis;
    int k = 0;
    s.diagonal().maxCoeff(&k);
    axis = s.col(k) / std::sqrt(std::max(s(k, k), 1e-18));
    axis.normalize();
    // Fix the sign so the result is consistent with the skew part when nonzero.
    if (skew_part.dot(axis) < 0.0) axis = -axis;
    return theta * axis;
  }
  return (theta / (2.0 * std::sin(theta))) * skew_part;
}

Mat3 axis_angle_jacobian(const Vec3& aa, int i) {
  // Gallego & Yezzi closed form for the derivative of the exponential map.
  const double theta2 = aa.squaredNorm();
  Vec3 e = Vec3::Zero();
  e[i] = 1.0;
  if (theta2 < 1e-14) {
    return skew(e);
  }
  const Mat3 r = axis_angle_to_matrix(aa);
  const Vec3 v = aa.cross((Mat3::Identity() - r) * e);
  return ((aa[i] * skew(aa) + skew(v)) / theta2) * r;
}

}  // namespace wfm
