#include "wfm/triangulation.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace wfm {

const char* to_string(JointStatus status) {
  switch (status) {
    case JointStatus::kValid:
      return "valid";
    case JointStatus::kTooFewConfidentViews:
      return "too_few_confident_views";
    case JointStatus::kDegenerateRays:
      return "degenerate_rays";
  }
  return "unknown";
}

namespace {

Eigen::Matrix<double, 3, 4> projection_matrix(const Pose& pose, const Intrinsics& in) {
  Eigen::Matrix3d k;
  k << in.fx, 0.0, in.cx, 0.0, in.fy, in.cy, 0.0, 0.0, 1.0;
  Eigen::Matrix<double, 3, 4> rt;
  rt.leftCols<3>() = pose.rotation;
  rt.col(3) = pose.translation;
  return k * rt;
}

// World-frame direction of the viewing ray through a pixel.
Vec3 pixel_ray(const ViewRay& v) {
  const Vec3 dir_cam((v.pixel.x() - v.intrinsics.cx) / v.intrinsics.fx,
                     (v.pixel.y() - v.intrinsics.cy) / v.intrinsics.fy, 1.0);
  return (v.pose.rotation.transpose() * dir_cam).normalized();
}

double weighted_pixel_objective(const std::vector<ViewRay>& views,
                                const std::vector<int>& gated, const Vec3& y) {
  double sum = 0.0;
  for (int idx : gated) {
    const ViewRay& v = views[idx];
    const Vec3 cam = v.pose.to_camera(y);
    if (!(cam.z() > 1e-9)) return std::numeric_limits<double>::infinity();
    const Vec2 u(v.intrinsics.fx * cam.x() / cam.z() + v.intrinsics.cx,
                 v.intrinsics.fy * cam.y() / cam.z() + v.intrinsics.cy);
    sum += v.confidence * (u - v.pixel).squaredNorm();
  }
  return sum;
}

// Damped Gauss-Newton on the weighted pixel objective, with step backtracking.
Vec3 refine_geometric(const std::vector<ViewRay>& views, const std::vector<int>& gated,
                      Vec3 y) {
  double value = weighted_pixel_objective(views, gated, y);
  for (int iter = 0; iter < 10; ++iter) {
    Mat3 jtj = Mat3::Zero();
    Vec3 jtr = Vec3::Zero();
    for (int idx : gated) {
      const ViewRay& v = views[idx];
      const Vec3 cam = v.pose.to_camera(y);
      if (!(cam.z() > 1e-9)) return y;
      const double iz = 1.0 / cam.z();
      const Vec2 u(v.intrinsics.fx * cam.x() * iz + v.intrinsics.cx,
                   v.intrinsics.fy * cam.y() * iz + v.intrinsics.cy);
      Eigen::Matrix<double, 2, 3> j_proj;
      j_proj << v.intrinsics.fx * iz, 0.0, -v.intrinsics.fx * cam.x() * iz * iz, 0.0,
          v.intrinsics.fy * iz, -v.intrinsics.fy * cam.y() * iz * iz;
      const Eigen::Matrix<double, 2, 3> j = j_proj * v.pose.rotation;
      jtj += v.confidence * (j.transpose() * j);
      jtr += v.confidence * (j.transpose() * (u - v.pixel));
    }
    const Vec3 step = jtj.ldlt().solve(-jtr);
    if (!step.allFinite()) break;
    double scale = 1.0;
    bool accepted = false;
    for (int half = 0; half < 8; ++half) {
      const Vec3 candidate = y + scale * step;
      const double candidate_value = weighted_pixel_objective(views, gated, candidate);
      if (candidate_value < value) {
        y = candidate;
        value = candidate_value;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted || step.norm() < 1e-12) break;
  }
  return y;
}

}  // namespace

TriangulatedJoint triangulate_joint(const std::vector<ViewRay>& views,
                                    const TriangulationConfig& config) {
  TriangulatedJoint out;

  std::vector<int> gated;
  for (size_t i = 0; i < views.size(); ++i)
    if (views[i].confidence >= config.confidence_gate) gated.push_back(static_cast<int>(i));
  if (gated.size() < 2) {
    out.status = JointStatus::kTooFewConfidentViews;
    return out;
  }

  // Reject near-parallel ray bundles before solving.
  double max_angle = 0.0;
  for (size_t a = 0; a < gated.size(); ++a) {
    const Vec3 ra = pixel_ray(views[gated[a]]);
    for (size_t b = a + 1; b < gated.size(); ++b) {
      const Vec3 rb = pixel_ray(views[gated[b]]);
      const double angle = std::acos(std::clamp(ra.dot(rb), -1.0, 1.0));
      max_angle = std::max(max_angle, angle);
    }
  }
  if (max_angle < config.min_angle_deg * M_PI / 180.0) {
    out.status = JointStatus::kDegenerateRays;
    return out;
  }

  Eigen::MatrixXd a(2 * gated.size(), 4);
  for (size_t i = 0; i < gated.size(); ++i) {
    const ViewRay& v = views[gated[i]];
    const auto p = projection_matrix(v.pose, v.intrinsics);
    const double w = std::sqrt(v.confidence);
    a.row(2 * i) = w * (v.pixel.x() * p.row(2) - p.row(0));
    a.row(2 * i + 1) = w * (v.pixel.y() * p.row(2) - p.row(1));
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d h = svd.matrixV().col(3);
  if (std::abs(h[3]) < 1e-12 * h.norm()) {
    out.status = JointStatus::kDegenerateRays;
    return out;
  }
  out.position = h.head<3>() / h[3];
  if (config.geometric_refinement)
    out.position = refine_geometric(views, gated, out.position);

  // RMS confidence-weighted geometric residual over the gated views.
  double sum = 0.0, wsum = 0.0;
  int in_front = 0;
  for (int idx : gated) {
    const ViewRay& v = views[idx];
    const Vec3 p_cam = v.pose.to_camera(out.position);
    if (!(p_cam.z() > 1e-9)) continue;
    ++in_front;
    const Vec2 u(v.intrinsics.fx * p_cam.x() / p_cam.z() + v.intrinsics.cx,
                 v.intrinsics.fy * p_cam.y() / p_cam.z() + v.intrinsics.cy);
    sum += v.confidence * (u - v.pixel).squaredNorm();
    wsum += v.confidence;
  }
  if (in_front == 0 || !(wsum > 0.0)) {
    out.status = JointStatus::kDegenerateRays;
    return out;
  }
  out.residual_px = std::sqrt(sum / wsum);
  return out;
}

std::vector<Keypoint3DFrame> triangulate_sequence(
    const std::vector<std::vector<Keypoint2DFrame>>& per_view_streams,
    const std::vector<Trajectory>& trajectories, const TriangulationConfig& config) {
  if (per_view_streams.size() < 2)
    throw InvalidArgument("triangulation needs at least two view streams");
  if (per_view_streams.size() != trajectories.size())
    throw SizeMismatch("one trajectory per keypoint stream required");

  const size_t frame_count = per_view_streams[0].size();
  for (const auto& stream : per_view_streams)
    if (stream.size() != frame_count)
      throw FrameMisalignment("keypoint streams disagree on frame count");
  for (const Trajectory& t : trajectories)
    if (t.size() < frame_count)
      throw FrameMisalignment("trajectory shorter than keypoint stream");
  if (frame_count == 0) return {};

  const size_t joint_count = per_view_streams[0][0].pixels.size();
  for (const auto& stream : per_view_streams)
    for (const Keypoint2DFrame& f : stream)
      if (f.pixels.size() != joint_count || f.confidences.size() != joint_count)
        throw SizeMismatch("joint count varies across frames or views");

  std::vector<Keypoint3DFrame> out(frame_count);
  for (size_t t = 0; t < frame_count; ++t) {
    out[t].frame = per_view_streams[0][t].frame;
    out[t].joints.resize(joint_count);
    for (size_t j = 0; j < joint_count; ++j) {
      std::vector<ViewRay> rays;
      rays.reserve(per_view_streams.size());
      for (size_t v = 0; v < per_view_streams.size(); ++v) {
        ViewRay ray;
        ray.pixel = per_view_streams[v][t].pixels[j];
        ray.confidence = per_view_streams[v][t].confidences[j];
        ray.pose = trajectories[v].frames[t].pose;
        ray.intrinsics = trajectories[v].intrinsics;
        rays.push_back(ray);
      }
      out[t].joints[j] = triangulate_joint(rays, config);
    }
  }
  return out;
}

}  // namespace wfm
