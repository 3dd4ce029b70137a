#pragma once

#include <array>
#include <optional>
#include <vector>

#include "wfm/geometry.hpp"
#include "wfm/kdtree.hpp"

namespace wfm {

/// One cross-view tracked point: the same physical point seen in both views
/// at frame `frame`, with per-view pixel, depth and confidence.
struct TrackedCorrespondence {
  int frame = 0;
  std::array<Vec2, 2> pixel{Vec2::Zero(), Vec2::Zero()};
  std::array<double, 2> depth{0.0, 0.0};
  std::array<double, 2> confidence{1.0, 1.0};

  /// min of the two confidences, by definition.
  double combined_weight() const { return std::min(confidence[0], confidence[1]); }
  void validate() const;
};

/// One sighting of a fixed world landmark in one view.
struct LandmarkObservation {
  int frame = 0;
  int landmark = 0;  // index into the landmark table
  Vec2 pixel = Vec2::Zero();
};

struct LossWeights {
  double track = 1.0;
  double chamfer = 0.1;
  double ba = 0.01;
  void validate() const;
};

/// Per-view rigid offset mapping the view frame into the scene frame,
/// restricted to yaw to preserve gravity alignment.
struct ViewOffset {
  double yaw = 0.0;
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return yaw_rotation(yaw) * p + translation; }
  SimilarityTransform to_similarity() const {
    return SimilarityTransform(1.0, yaw_rotation(yaw), translation);
  }
};

using OffsetGradient = Eigen::Vector4d;  // d/d(yaw, tx, ty, tz)

/// Cross-view world consistency of tracked points under candidate offsets.
///
/// Back-projections through the unadjusted trajectories are precomputed once;
/// evaluate() applies the offsets and returns the mean weighted squared
/// world-space gap, with optional analytic gradients per view.
class TrackLossTerm {
 public:
  TrackLossTerm(const std::vector<TrackedCorrespondence>& correspondences,
                const Trajectory& traj_a, const Trajectory& traj_b);

  double evaluate(const ViewOffset& offset_a, const ViewOffset& offset_b,
                  OffsetGradient* grad_a = nullptr,
                  OffsetGradient* grad_b = nullptr) const;

  size_t size() const { return pairs_.size(); }

 private:
  struct Pair {
    Vec3 base_a, base_b;  // view-frame back-projections
    double weight;
  };
  std::vector<Pair> pairs_;
};

/// Symmetric mean-of-squared nearest-neighbor distance between two clouds,
/// kd-tree accelerated and bit-equal to the O(nm) scan.
/// Throws EmptyCloud.
double chamfer(const PointCloud& a, const PointCloud& b);

/// One view's local cloud against the global scene cloud, as a function of
/// the view offset. Nearest neighbors are refreshed at every evaluation and
/// held fixed for the gradient.
class ChamferTerm {
 public:
  ChamferTerm(const PointCloud& local_view_frame, const PointCloud& global_scene_frame);

  double evaluate(const ViewOffset& offset, OffsetGradient* grad = nullptr) const;

 private:
  std::vector<Vec3> local_;
  std::vector<Vec3> global_;
  KdTree3 global_tree_;
};

/// Mean squared pixel reprojection error of fixed scene landmarks under a
/// candidate view offset. Observations whose landmark falls behind the camera
/// are dropped from the mean; the dropped count is reported.
class BaLossTerm {
 public:
  BaLossTerm(std::vector<LandmarkObservation> observations,
             std::vector<Vec3> landmark_points, const Trajectory& traj);

  double evaluate(const ViewOffset& offset, OffsetGradient* grad = nullptr,
                  int* dropped = nullptr) const;

 private:
  std::vector<LandmarkObservation> obs_;
  std::vector<Vec3> landmarks_;
  std::vector<Pose> poses_;  // per observation
  Intrinsics intrinsics_;
};

/// Convenience single-shot forms of the term classes.
double track_loss(const std::vector<TrackedCorrespondence>& correspondences,
                  const std::array<ViewOffset, 2>& offsets,
                  const Trajectory& traj_a, const Trajectory& traj_b);
double ba_loss(const std::vector<LandmarkObservation>& observations,
               const std::vector<Vec3>& landmark_points,
               const ViewOffset& offset, const Trajectory& traj,
               int* dropped = nullptr);

/// Weighted composite of the term values with a per-term breakdown; the
/// breakdown fields sum exactly to total (fixed summation order).
struct CompositeBreakdown {
  double total = 0.0;
  double track = 0.0;                // unweighted term values
  std::vector<double> chamfer;       // per view
  std::vector<double> ba;            // per view
};

CompositeBreakdown composite_loss(const LossWeights& w,
                                  std::optional<double> track_value,
                                  const std::vector<double>& chamfer_values,
                                  const std::vector<double>& ba_values);

}  // namespace wfm
