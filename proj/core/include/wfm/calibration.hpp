#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "wfm/adam.hpp"
#include "wfm/alignment.hpp"
#include "wfm/geometry.hpp"
#include "wfm/losses.hpp"

namespace wfm {

/// One yaw+translation offset per view, yaw wrapped to (-pi, pi].
struct OffsetParams {
  std::vector<ViewOffset> views;
  void wrap();
};

struct OptimizerConfig {
  AdamOptions adam;
  LossWeights weights;
  bool check_gradient = false;  // finite-difference check at the initial iterate
};

struct ViewCalibrationInput {
  Trajectory trajectory;                       // view (device) frame
  PointCloud cloud;                            // view frame, human regions removed upstream
  std::vector<LandmarkObservation> landmarks;  // sightings of scene landmarks
};

struct CalibrationInput {
  std::vector<ViewCalibrationInput> views;    // one or two
  std::vector<TrackedCorrespondence> tracks;  // cross-view pairs; empty for single view
  std::vector<Vec3> landmark_points;          // scene frame
  PointCloud global_cloud;                    // scene frame
};

struct CalibrationResult {
  OffsetParams params;                              // best-so-far iterate
  std::vector<double> loss_history;                 // composite loss per iteration
  std::vector<std::vector<double>> view_histories;  // per view when decoupled
  double best_loss = 0.0;
  int iterations = 0;
  bool aborted_non_finite = false;  // stopped on a non-finite loss mid-run
  double gradient_check_error = -1.0;  // set when check_gradient was on
};

/// Yaw-constrained Procrustes of trajectory camera centers onto sparsely
/// registered scene-frame poses; scale fixed to 1 (both frames are metric)
/// unless with_scale. Throws TooFewRegistrations / DegenerateConfiguration.
SimilarityTransform initialize_offset(
    const Trajectory& view_trajectory,
    const std::vector<std::pair<int, Pose>>& registered_poses,
    bool with_scale = false);

/// Refines per-view offsets by minimizing the weighted composite of the track,
/// Chamfer and landmark-reprojection terms with gradient-clipped Adam.
///
/// When the track term is inactive (weight 0, no tracks, or a single view) the
/// per-view problems decouple and are solved independently.
CalibrationResult calibrate(const CalibrationInput& input, const OffsetParams& init,
                            const OptimizerConfig& config);

}  // namespace wfm
