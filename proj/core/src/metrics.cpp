#include "wfm/metrics.hpp"

#include <cmath>

#include <Eigen/SVD>

#include "wfm/alignment.hpp"

namespace wfm {

void JointSequence::validate() const {
  if (frames.empty()) throw EmptyInput("empty joint sequence");
  const size_t j = frames[0].size();
  for (const auto& f : frames)
    if (f.size() != j) throw SizeMismatch("joint count varies across frames");
}

namespace {

// Rank-tolerant rigid least-squares alignment. Evaluation inputs may be
// degenerate (a perfectly straight root path, say); any optimum gives the
// same residuals, so no rank check is made.
SimilarityTransform rigid_align(const std::vector<Vec3>& source,
                                const std::vector<Vec3>& target) {
  Vec3 sm = Vec3::Zero(), tm = Vec3::Zero();
  for (size_t i = 0; i < source.size(); ++i) {
    sm += source[i];
    tm += target[i];
  }
  sm /= static_cast<double>(source.size());
  tm /= static_cast<double>(source.size());
  Mat3 cross = Mat3::Zero();
  for (size_t i = 0; i < source.size(); ++i)
    cross += (source[i] - sm) * (target[i] - tm).transpose();
  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 fix(1.0, 1.0, 1.0);
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) fix.z() = -1.0;
  const Mat3 r = svd.matrixV() * fix.asDiagonal() * svd.matrixU().transpose();
  return SimilarityTransform(1.0, r, tm - r * sm);
}

// Rigid alignment (pred -> gt) fitted on the given frame range's joints.
SimilarityTransform chunk_alignment(const JointSequence& pred, const JointSequence& gt,
                                    size_t begin, size_t end) {
  std::vector<Vec3> source, target;
  for (size_t t = begin; t < end; ++t)
    for (size_t j = 0; j < pred.frames[t].size(); ++j) {
      source.push_back(pred.frames[t][j]);
      target.push_back(gt.frames[t][j]);
    }
  return rigid_align(source, target);
}

double chunked_mpjpe(const JointSequence& pred, const JointSequence& gt, int chunk,
                     bool align_whole_chunk) {
  pred.validate();
  gt.validate();
  if (pred.frame_count() != gt.frame_count() || pred.joint_count() != gt.joint_count())
    throw LengthMismatch("prediction and ground truth disagree in shape");
  if (chunk < 2) throw InvalidArgument("chunk must be >= 2 frames");

  double chunk_sum = 0.0;
  int chunk_count = 0;
  for (size_t begin = 0; begin < pred.frame_count(); begin += chunk) {
    const size_t end = std::min(begin + chunk, pred.frame_count());
    if (end - begin < 2) break;  // trailing sliver, nothing to align
    const size_t align_end = align_whole_chunk ? end : begin + 2;
    const SimilarityTransform t = chunk_alignment(pred, gt, begin, align_end);

    double err_sum = 0.0;
    size_t n = 0;
    for (size_t f = begin; f < end; ++f)
      for (size_t j = 0; j < pred.joint_count(); ++j) {
        err_sum += (gt.frames[f][j] - apply_similarity(t, pred.frames[f][j])).norm();
        ++n;
      }
    chunk_sum += err_sum / static_cast<double>(n);
    ++chunk_count;
  }
  if (chunk_count == 0) throw InvalidArgument("sequence shorter than 2 frames");
  return 1000.0 * chunk_sum / static_cast<double>(chunk_count);
}

}  // namespace

double w_mpjpe_mm(const JointSequence& pred, const JointSequence& gt, int chunk) {
  return chunked_mpjpe(pred, gt, chunk, /*align_whole_chunk=*/false);
}

double wa_mpjpe_mm(const JointSequence& pred, const JointSequence& gt, int chunk) {
  return chunked_mpjpe(pred, gt, chunk, /*align_whole_chunk=*/true);
}

double rte_percent(const std::vector<Vec3>& pred_root, const std::vector<Vec3>& gt_root) {
  if (pred_root.size() != gt_root.size())
    throw LengthMismatch("root trajectory lengths differ");
  if (pred_root.size() < 2) throw InvalidArgument("need >= 2 frames for RTE");

  double path = 0.0;
  for (size_t t = 1; t < gt_root.size(); ++t) path += (gt_root[t] - gt_root[t - 1]).norm();
  if (!(path > 0.0)) throw ZeroDisplacement("ground-truth root does not move");

  const SimilarityTransform t = rigid_align(pred_root, gt_root);

  double err = 0.0;
  for (size_t i = 0; i < pred_root.size(); ++i)
    err += (gt_root[i] - apply_similarity(t, pred_root[i])).norm();
  err /= static_cast<double>(pred_root.size());
  return 100.0 * err / path;
}

double jitter(const JointSequence& seq, const std::vector<int>& foot_joint_ids,
              double contact_height, bool* no_contact) {
  seq.validate();
  if (no_contact) *no_contact = false;
  if (seq.frame_count() < 2) throw InvalidArgument("need >= 2 frames for jitter");

  double speed_sum = 0.0;
  size_t n = 0;
  for (size_t t = 0; t + 1 < seq.frame_count(); ++t) {
    for (int j : foot_joint_ids) {
      if (seq.frames[t][j].z() >= contact_height) continue;
      const Vec2 d = (seq.frames[t + 1][j] - seq.frames[t][j]).head<2>();
      speed_sum += d.norm();
      ++n;
    }
  }
  if (n == 0) {
    if (no_contact) *no_contact = true;
    return 0.0;
  }
  return speed_sum / static_cast<double>(n);
}

double reproj_error_px(const JointSequence& pred,
                       const std::vector<std::vector<Keypoint2DFrame>>& keypoints_per_view,
                       const std::vector<Trajectory>& trajectories) {
  pred.validate();
  if (keypoints_per_view.size() != trajectories.size())
    throw SizeMismatch("one trajectory per view required");

  double sum = 0.0;
  size_t n = 0;
  for (size_t v = 0; v < keypoints_per_view.size(); ++v) {
    const auto& stream = keypoints_per_view[v];
    if (stream.size() != pred.frame_count())
      throw LengthMismatch("keypoint stream length differs from prediction");
    for (const Keypoint2DFrame& f : stream)
      if (f.pixels.size() != pred.joint_count())
        throw SizeMismatch("keypoint joint count differs from prediction");
    for (size_t t = 0; t < stream.size(); ++t) {
      const Pose& pose = trajectories[v].frames[t].pose;
      for (size_t j = 0; j < pred.joint_count(); ++j) {
        if (!(stream[t].confidences[j] > 0.0)) continue;
        const Vec3 p_cam = pose.to_camera(pred.frames[t][j]);
        if (!(p_cam.z() > 1e-9)) continue;
        const Intrinsics& in = trajectories[v].intrinsics;
        const Vec2 u(in.fx * p_cam.x() / p_cam.z() + in.cx,
                     in.fy * p_cam.y() / p_cam.z() + in.cy);
        sum += (u - stream[t].pixels[j]).norm();
        ++n;
      }
    }
  }
  if (n == 0) throw EmptyObservations("no measurable keypoints");
  return sum / static_cast<double>(n);
}

double depth_mse_proxy(const JointSequence& pred, const std::vector<Trajectory>& trajectories,
                       const std::vector<DepthSample>& samples) {
  pred.validate();
  if (samples.empty()) throw EmptyObservations("no depth samples");
  double sum = 0.0;
  for (const DepthSample& s : samples) {
    if (s.view < 0 || s.view >= static_cast<int>(trajectories.size()))
      throw InvalidArgument("depth sample view out of range");
    if (s.frame < 0 || s.frame >= static_cast<int>(pred.frame_count()) ||
        s.joint < 0 || s.joint >= static_cast<int>(pred.joint_count()) ||
        s.frame >= static_cast<int>(trajectories[s.view].size()))
      throw InvalidArgument("depth sample indices out of range");
    const Pose& pose = trajectories[s.view].frames[s.frame].pose;
    const double z = pose.to_camera(pred.frames[s.frame][s.joint]).z();
    sum += (z - s.depth) * (z - s.depth);
  }
  return sum / static_cast<double>(samples.size());
}

}  // namespace wfm
