#include "wfm/alignment.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace wfm {

void CorrespondenceSet::validate() const {
  if (source.empty()) throw EmptyInput("empty correspondence set");
  if (source.size() != target.size())
    throw SizeMismatch("source/target size mismatch");
  if (!weights.empty()) {
    if (weights.size() != source.size())
      throw SizeMismatch("weights size mismatch");
    double sum = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0 && w <= 1.0)) throw InvalidArgument("weight outside [0,1]");
      sum += w;
    }
    if (!(sum > 0.0)) throw InvalidArgument("weights sum to zero");
  }
}

namespace {

struct Centered {
  Vec3 source_mean = Vec3::Zero();
  Vec3 target_mean = Vec3::Zero();
  double weight_sum = 0.0;
};

Centered weighted_means(const CorrespondenceSet& c) {
  Centered out;
  for (size_t i = 0; i < c.source.size(); ++i) {
    const double w = c.weight(i);
    out.source_mean += w * c.source[i];
    out.target_mean += w * c.target[i];
    out.weight_sum += w;
  }
  out.source_mean /= out.weight_sum;
  out.target_mean /= out.weight_sum;
  return out;
}

}  // namespace

SimilarityTransform procrustes_similarity(const CorrespondenceSet& c, bool with_scale) {
  c.validate();
  if (c.source.size() < 3)
    throw DegenerateConfiguration("need >= 3 correspondences for a full similarity");

  const Centered m = weighted_means(c);

  Mat3 cross = Mat3::Zero();    // Σ w·x_c·y_cᵀ
  Mat3 scatter = Mat3::Zero();  // Σ w·x_c·x_cᵀ (source rank check + scale denominator)
  for (size_t i = 0; i < c.source.size(); ++i) {
    const double w = c.weight(i);
    const Vec3 xc = c.source[i] - m.source_mean;
    const Vec3 yc = c.target[i] - m.target_mean;
    cross += w * (xc * yc.transpose());
    scatter += w * (xc * xc.transpose());
  }

  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  const Vec3 ev = eig.eigenvalues();  // ascending
  if (!(ev[1] > 1e-12 * std::max(ev[2], 1e-30)))
    throw DegenerateConfiguration("centered source points are collinear or coincident");

  // R maximizes tr(R·cross): R = V·diag(1,1,det(VUᵀ))·Uᵀ with cross = U·S·Vᵀ.
  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Vec3 sign_fix(1.0, 1.0, 1.0);
  if ((v * u.transpose()).determinant() < 0.0) sign_fix.z() = -1.0;
  const Mat3 rotation = v * sign_fix.asDiagonal() * u.transpose();

  double scale = 1.0;
  if (with_scale) {
    double num = 0.0;
    for (size_t i = 0; i < c.source.size(); ++i) {
      const double w = c.weight(i);
      const Vec3 xc = c.source[i] - m.source_mean;
      const Vec3 yc = c.target[i] - m.target_mean;
      num += w * yc.dot(rotation * xc);
    }
    const double den = scatter.trace();
    if (!(den > 0.0) || !(num > 0.0))
      throw DegenerateConfiguration("non-positive scale estimate");
    scale = num / den;
  }

  SimilarityTransform t;
  t.scale = scale;
  t.rotation = rotation;
  t.translation = m.target_mean - scale * (rotation * m.source_mean);
  return t;
}

SimilarityTransform procrustes_yaw(const CorrespondenceSet& c, bool with_scale) {
  c.validate();
  if (c.source.size() < 2)
    throw DegenerateConfiguration("need >= 2 correspondences for yaw alignment");

  const Centered m = weighted_means(c);

  // 2x2 xy cross-covariance terms plus the z and normalization sums.
  double trace_part = 0.0;  // Σ w (ax·bx + ay·by)
  double skew_part = 0.0;   // Σ w (ax·by − ay·bx)
  double z_part = 0.0;      // Σ w az·bz
  double source_sq = 0.0;   // Σ w ‖x_c‖²
  double xy_spread = 0.0;
  for (size_t i = 0; i < c.source.size(); ++i) {
    const double w = c.weight(i);
    const Vec3 a = c.source[i] - m.source_mean;
    const Vec3 b = c.target[i] - m.target_mean;
    trace_part += w * (a.x() * b.x() + a.y() * b.y());
    skew_part += w * (a.x() * b.y() - a.y() * b.x());
    z_part += w * a.z() * b.z();
    source_sq += w * a.squaredNorm();
    xy_spread += w * (a.x() * a.x() + a.y() * a.y());
  }

  if (!(xy_spread > 1e-18))
    throw DegenerateConfiguration("centered source has no xy spread");
  if (std::hypot(trace_part, skew_part) < 1e-18)
    throw DegenerateConfiguration("yaw unobservable from correspondences");

  const double yaw = std::atan2(skew_part, trace_part);

  double scale = 1.0;
  if (with_scale) {
    const double num =
        trace_part * std::cos(yaw) + skew_part * std::sin(yaw) + z_part;
    if (!(source_sq > 0.0) || !(num > 0.0))
      throw DegenerateConfiguration("non-positive scale estimate");
    scale = num / source_sq;
  }

  SimilarityTransform t;
  t.scale = scale;
  t.rotation = yaw_rotation(yaw);
  t.translation = m.target_mean - scale * (t.rotation * m.source_mean);
  return t;
}

double alignment_residual(const CorrespondenceSet& c, const SimilarityTransform& t) {
  c.validate();
  double sum = 0.0;
  for (size_t i = 0; i < c.source.size(); ++i)
    sum += c.weight(i) * (c.target[i] - apply_similarity(t, c.source[i])).squaredNorm();
  return sum;
}

Trajectory apply_offset_to_trajectory(const Trajectory& traj, const SimilarityTransform& offset) {
  if (std::abs(offset.scale - 1.0) > 1e-12)
    throw ScaleNotUnity("trajectory offsets must be rigid (scale 1)");
  Trajectory out = traj;
  const Mat3 rot_t = offset.rotation.transpose();
  for (TrajectoryFrame& f : out.frames) {
    const Mat3 r_new = f.pose.rotation * rot_t;
    f.pose.translation = f.pose.translation - r_new * offset.translation;
    f.pose.rotation = r_new;
  }
  return out;
}

ChunkAlignment stitch_chunks(const std::vector<TrajectoryChunk>& chunks,
                             const std::vector<int>& overlap_counts,
                             bool with_scale) {
  if (chunks.empty()) throw EmptyInput("no chunks");
  if (overlap_counts.size() + 1 != chunks.size())
    throw SizeMismatch("need one overlap count per adjacent chunk pair");

  ChunkAlignment out;
  out.per_chunk.resize(chunks.size());
  out.cumulative.resize(chunks.size());
  out.per_chunk[0] = SimilarityTransform::identity();
  out.cumulative[0] = SimilarityTransform::identity();

  for (size_t k = 1; k < chunks.size(); ++k) {
    const Trajectory& prev = chunks[k - 1].trajectory;
    const Trajectory& cur = chunks[k].trajectory;
    const int n = overlap_counts[k - 1];
    if (n < 3) throw InsufficientOverlap("adjacent chunks must share >= 3 frames");
    if (n > static_cast<int>(prev.size()) || n > static_cast<int>(cur.size()))
      throw InsufficientOverlap("overlap longer than chunk");

    CorrespondenceSet c;
    // Tail of the previous chunk matches the head of the current one.
    for (int i = 0; i < n; ++i) {
      c.source.push_back(cur.frames[i].pose.center());
      c.target.push_back(prev.frames[prev.size() - n + i].pose.center());
    }
    const PointCloud& cloud_prev = chunks[k - 1].cloud;
    const PointCloud& cloud_cur = chunks[k].cloud;
    if (!cloud_prev.points.empty() && cloud_prev.size() == cloud_cur.size()) {
      for (size_t i = 0; i < cloud_cur.size(); ++i) {
        c.source.push_back(cloud_cur.points[i]);
        c.target.push_back(cloud_prev.points[i]);
      }
    }
    out.per_chunk[k] = procrustes_similarity(c, with_scale);
    out.cumulative[k] = out.cumulative[k - 1].compose(out.per_chunk[k]);
  }
  return out;
}

double metric_scale(const std::vector<double>& depth_reference,
                    const std::vector<double>& depth_relative) {
  if (depth_reference.empty()) throw EmptyInput("no depth samples");
  if (depth_reference.size() != depth_relative.size())
    throw SizeMismatch("depth sample count mismatch");
  std::vector<double> ratios(depth_reference.size());
  for (size_t i = 0; i < ratios.size(); ++i) {
    if (!(depth_reference[i] > 0.0) || !(depth_relative[i] > 0.0))
      throw NonPositiveDepth();
    ratios[i] = depth_reference[i] / depth_relative[i];
  }
  // Lower median: deterministic for even counts.
  const size_t mid = (ratios.size() - 1) / 2;
  std::nth_element(ratios.begin(), ratios.begin() + mid, ratios.end());
  return ratios[mid];
}

}  // namespace wfm
