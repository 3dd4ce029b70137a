#pragma once

#include <vector>

#include "wfm/adam.hpp"
#include "wfm/geometry.hpp"
#include "wfm/skeleton.hpp"
#include "wfm/triangulation.hpp"

namespace wfm {

struct FitWeights {
  double kp3d = 1.0;
  double smooth = 0.5;
  double prior = 0.01;
  double reproj = 1e-4;
};

struct FitConfig {
  FitWeights weights;
  AdamOptions stage1;  // shape + root translation, poses frozen
  AdamOptions stage2;  // everything
  bool check_gradient = false;

  FitConfig() {
    stage1.max_iterations = 300;
    stage1.learning_rate = 1e-2;
    stage2.max_iterations = 800;
    stage2.learning_rate = 3e-3;
  }
};

struct FitResult {
  SkeletonParams params;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> stage1_history;
  std::vector<double> stage2_history;
  bool aborted_non_finite = false;  // a stage stopped on a non-finite loss
  double gradient_check_error = -1.0;
};

/// World-space two-stage skeleton fit against triangulated joints, 2D
/// keypoints, temporal smoothness and a pull toward the initialization pose.
/// Throws NoValidJoints when a fitted frame has no valid triangulated joint.
FitResult fit_motion(const SkeletonModel& model,
                     const std::vector<Keypoint3DFrame>& joints3d,
                     const std::vector<std::vector<Keypoint2DFrame>>& keypoints_per_view,
                     const std::vector<Trajectory>& trajectories,
                     const SkeletonParams& init, const FitConfig& config);

/// Evaluates the fit objective at given params (used for reporting/ablation).
double fit_loss(const SkeletonModel& model, const std::vector<Keypoint3DFrame>& joints3d,
                const std::vector<std::vector<Keypoint2DFrame>>& keypoints_per_view,
                const std::vector<Trajectory>& trajectories, const SkeletonParams& init,
                const SkeletonParams& at, const FitWeights& weights);

struct ContactMarker {
  int frame = 0;
  Vec3 position = Vec3::Zero();  // annotated marker, meters
  double z = 0.0;                // contact height the feet should reach
};

struct ContactAnnotation {
  std::vector<ContactMarker> markers;
};

struct ContactAlignResult {
  double yaw = 0.0;
  Vec3 translation = Vec3::Zero();
  SkeletonParams params;
  std::vector<Trajectory> trajectories;
  std::vector<double> history;
};

/// Solves an xy-plane rigid transform (yaw about z plus translation) aligning
/// the feet at annotated contact frames to their markers, by gradient descent
/// on the squared xy gap of the feet midpoint plus the squared gap between the
/// lowest foot point and the marker height. The recovered transform is applied
/// to the skeleton (global orientation, root) and to the camera trajectories
/// so that projected 2D keypoints are preserved.
ContactAlignResult contact_align(const SkeletonModel& model, const SkeletonParams& params,
                                 const std::vector<Trajectory>& trajectories,
                                 const ContactAnnotation& annotation,
                                 const AdamOptions& options);

}  // namespace wfm
