#pragma once

#include <vector>

#include "wfm/geometry.hpp"

namespace wfm {

/// Paired 3D correspondences with optional weights in [0,1].
struct CorrespondenceSet {
  std::vector<Vec3> source;
  std::vector<Vec3> target;
  std::vector<double> weights;  // empty = all ones

  /// Throws SizeMismatch / InvalidArgument / EmptyInput.
  void validate() const;
  double weight(size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
};

/// Weighted least-squares similarity fit: minimizes Σ wᵢ‖yᵢ − (s·R·xᵢ + T)‖².
///
/// Closed form via SVD of the weighted cross-covariance, with the usual
/// det(R) = +1 sign fix. with_scale = false pins s = 1. Requires the centered
/// source to have rank ≥ 2; throws DegenerateConfiguration otherwise.
SimilarityTransform procrustes_similarity(const CorrespondenceSet& c, bool with_scale);

/// Same objective with the rotation restricted to z-axis (yaw) rotations.
///
/// The optimal yaw comes from the 2×2 xy cross-covariance: atan2 of its skew
/// part over its trace. Needs ≥ 2 correspondences with xy spread; throws
/// DegenerateConfiguration when the yaw is unobservable.
SimilarityTransform procrustes_yaw(const CorrespondenceSet& c, bool with_scale);

/// Weighted sum of squared residuals Σ wᵢ‖yᵢ − t(xᵢ)‖² of a candidate fit.
double alignment_residual(const CorrespondenceSet& c, const SimilarityTransform& t);

/// Remaps a trajectory into the world frame defined by `offset`
/// (p_new = offset.rotation · p_old + offset.translation): camera centers move
/// rigidly and back-projected points commute with apply_similarity.
/// Requires offset.scale == 1; throws ScaleNotUnity.
Trajectory apply_offset_to_trajectory(const Trajectory& traj, const SimilarityTransform& offset);

struct TrajectoryChunk {
  Trajectory trajectory;
  PointCloud cloud;  // optional; adjacent equal-sized clouds are used as extra pairs
};

/// Pairwise chunk alignment chained into chunk 0's frame.
struct ChunkAlignment {
  std::vector<SimilarityTransform> per_chunk;   // [k]: chunk k -> chunk k-1; [0] = identity
  std::vector<SimilarityTransform> cumulative;  // [k]: chunk k -> chunk 0
};

/// Aligns consecutive chunks on their overlapping camera centers (plus cloud
/// points when both adjacent clouds are non-empty and equal-sized).
/// overlap_counts[k] frames are shared between the tail of chunk k and the
/// head of chunk k+1; each must be ≥ 3 (InsufficientOverlap otherwise).
ChunkAlignment stitch_chunks(const std::vector<TrajectoryChunk>& chunks,
                             const std::vector<int>& overlap_counts,
                             bool with_scale = true);

/// Relative→metric scale factor: lower median of depth_reference / depth_relative.
/// The reciprocal convention (relative units per meter) is median(rel/ref),
/// obtained by swapping the arguments.
double metric_scale(const std::vector<double>& depth_reference,
                    const std::vector<double>& depth_relative);

}  // namespace wfm
