#pragma once

#include <string>
#include <vector>

#include "wfm/geometry.hpp"

namespace wfm {

/// One view's sighting of a joint: pixel, detector confidence and the camera
/// observing it.
struct ViewRay {
  Vec2 pixel = Vec2::Zero();
  double confidence = 1.0;
  Pose pose;
  Intrinsics intrinsics;
};

enum class JointStatus {
  kValid,
  kTooFewConfidentViews,
  kDegenerateRays,
};

const char* to_string(JointStatus status);

struct TriangulatedJoint {
  Vec3 position = Vec3::Zero();
  double residual_px = 0.0;  // RMS confidence-weighted reprojection error
  JointStatus status = JointStatus::kValid;
  bool valid() const { return status == JointStatus::kValid; }
};

struct TriangulationConfig {
  double confidence_gate = 0.3;   // views below this confidence are ignored
  double min_angle_deg = 2.0;     // smallest usable pairwise ray angle
  // Polish the algebraic solution with a few Gauss-Newton steps on the
  // confidence-weighted pixel objective (the algebraic optimum alone can sit
  // measurably off the geometric one).
  bool geometric_refinement = true;
};

/// Confidence-weighted homogeneous DLT: every gated view contributes two rows
/// scaled by sqrt(confidence); the solution is the right singular vector of
/// the smallest singular value, dehomogenized, then refined on the geometric
/// objective unless disabled.
TriangulatedJoint triangulate_joint(const std::vector<ViewRay>& views,
                                    const TriangulationConfig& config = {});

/// 2D joint detections of one view at one frame (fixed joint count J).
struct Keypoint2DFrame {
  int frame = 0;
  std::vector<Vec2> pixels;
  std::vector<double> confidences;
};

struct Keypoint3DFrame {
  int frame = 0;
  std::vector<TriangulatedJoint> joints;
};

/// Per-frame, per-joint triangulation across synchronized view streams.
/// Streams must agree on frame count (FrameMisalignment) and joint count.
std::vector<Keypoint3DFrame> triangulate_sequence(
    const std::vector<std::vector<Keypoint2DFrame>>& per_view_streams,
    const std::vector<Trajectory>& trajectories,
    const TriangulationConfig& config = {});

}  // namespace wfm
