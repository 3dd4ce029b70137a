#pragma once

#include <vector>

#include "wfm/geometry.hpp"
#include "wfm/triangulation.hpp"

namespace wfm {

/// World-frame joint positions per frame (frames × J), meters.
struct JointSequence {
  std::vector<std::vector<Vec3>> frames;
  double fps = 30.0;

  size_t frame_count() const { return frames.size(); }
  size_t joint_count() const { return frames.empty() ? 0 : frames[0].size(); }
  void validate() const;
};

/// World MPJPE in millimeters: per chunk, a rigid (no-scale) alignment is
/// estimated from the joints of the first two frames, then the mean per-joint
/// error is taken and averaged over chunks. Chunks are consecutive windows of
/// `chunk` frames; a trailing partial chunk participates when it has >= 2
/// frames.
double w_mpjpe_mm(const JointSequence& pred, const JointSequence& gt, int chunk);

/// Same but with the rigid alignment estimated over the whole chunk.
double wa_mpjpe_mm(const JointSequence& pred, const JointSequence& gt, int chunk);

/// Root translation error: rigid (no-scale) alignment of the root
/// trajectories, then mean root error divided by the total ground-truth path
/// length, as a percentage. Throws ZeroDisplacement.
double rte_percent(const std::vector<Vec3>& pred_root, const std::vector<Vec3>& gt_root);

/// Foot-skating measure: mean horizontal foot speed (meters/frame) over the
/// frames where the foot is below contact_height, averaged across foot
/// joints. An empty contact set yields 0 and sets *no_contact.
double jitter(const JointSequence& seq, const std::vector<int>& foot_joint_ids,
              double contact_height = 0.05, bool* no_contact = nullptr);

/// Mean Euclidean pixel error between projected joints and 2D detections with
/// positive confidence; behind-camera joints are skipped.
/// Throws EmptyObservations when nothing is measurable.
double reproj_error_px(const JointSequence& pred,
                       const std::vector<std::vector<Keypoint2DFrame>>& keypoints_per_view,
                       const std::vector<Trajectory>& trajectories);

/// Observed depth at a joint pixel, for the depth-consistency proxy.
struct DepthSample {
  int view = 0;
  int frame = 0;
  int joint = 0;
  double depth = 0.0;  // meters
};

/// Mean squared difference between predicted camera-frame joint depths and
/// observed depth samples (m²). Named a proxy: it compares joint depths, not
/// a rendered body surface.
double depth_mse_proxy(const JointSequence& pred, const std::vector<Trajectory>& trajectories,
                       const std::vector<DepthSample>& samples);

}  // namespace wfm
