#include "wfm/losses.hpp"

#include "wfm/parallel.hpp"

#include <cmath>

namespace wfm {

void TrackedCorrespondence::validate() const {
  if (!(depth[0] > 0.0) || !(depth[1] > 0.0)) throw NonPositiveDepth();
  for (double c : confidence)
    if (!(c >= 0.0 && c <= 1.0)) throw InvalidArgument("track confidence outside [0,1]");
}

void LossWeights::validate() const {
  if (track < 0.0 || chamfer < 0.0 || ba < 0.0)
    throw InvalidArgument("loss weights must be non-negative");
  if (track == 0.0 && chamfer == 0.0 && ba == 0.0)
    throw InvalidArgument("all loss weights are zero");
}

TrackLossTerm::TrackLossTerm(const std::vector<TrackedCorrespondence>& correspondences,
                             const Trajectory& traj_a, const Trajectory& traj_b) {
  if (correspondences.empty()) throw EmptyCorrespondences();
  pairs_.reserve(correspondences.size());
  const int len = static_cast<int>(std::min(traj_a.size(), traj_b.size()));
  for (const TrackedCorrespondence& c : correspondences) {
    c.validate();
    if (c.frame < 0 || c.frame >= len)
      throw InvalidArgument("tracked correspondence frame outside both trajectories");
    Pair p;
    p.base_a = backproject(c.pixel[0], c.depth[0], traj_a.frames[c.frame].pose,
                           traj_a.intrinsics);
    p.base_b = backproject(c.pixel[1], c.depth[1], traj_b.frames[c.frame].pose,
                           traj_b.intrinsics);
    p.weight = c.combined_weight();
    pairs_.push_back(p);
  }
}

double TrackLossTerm::evaluate(const ViewOffset& oa, const ViewOffset& ob,
                               OffsetGradient* grad_a, OffsetGradient* grad_b) const {
  const Mat3 ra = yaw_rotation(oa.yaw);
  const Mat3 rb = yaw_rotation(ob.yaw);
  const Mat3 da = yaw_rotation_derivative(oa.yaw);
  const Mat3 db = yaw_rotation_derivative(ob.yaw);
  const double inv_n = 1.0 / static_cast<double>(pairs_.size());

  if (grad_a) grad_a->setZero();
  if (grad_b) grad_b->setZero();

  double loss = 0.0;
  for (const Pair& p : pairs_) {
    const Vec3 qa = ra * p.base_a + oa.translation;
    const Vec3 qb = rb * p.base_b + ob.translation;
    const Vec3 r = qa - qb;
    loss += p.weight * r.squaredNorm();
    if (grad_a) {
      const double s = 2.0 * p.weight * inv_n;
      (*grad_a)[0] += s * r.dot(da * p.base_a);
      grad_a->tail<3>() += s * r;
    }
    if (grad_b) {
      const double s = 2.0 * p.weight * inv_n;
      (*grad_b)[0] -= s * r.dot(db * p.base_b);
      grad_b->tail<3>() -= s * r;
    }
  }
  return loss * inv_n;
}

double chamfer(const PointCloud& a, const PointCloud& b) {
  if (a.points.empty() || b.points.empty()) throw EmptyCloud("chamfer on empty cloud");
  const KdTree3 tree_a(a.points);
  const KdTree3 tree_b(b.points);
  // Per-point distances fill index slots in parallel; the reductions below
  // run in index order, so results are independent of the worker count.
  std::vector<double> d_ab(a.size()), d_ba(b.size());
  parallel_for(static_cast<int>(a.size()),
               [&](int i) { tree_b.nearest(a.points[i], &d_ab[i]); });
  parallel_for(static_cast<int>(b.size()),
               [&](int i) { tree_a.nearest(b.points[i], &d_ba[i]); });
  double sum_ab = 0.0;
  for (double d : d_ab) sum_ab += d;
  double sum_ba = 0.0;
  for (double d : d_ba) sum_ba += d;
  return sum_ab / static_cast<double>(a.size()) + sum_ba / static_cast<double>(b.size());
}

ChamferTerm::ChamferTerm(const PointCloud& local, const PointCloud& global)
    : local_(local.points), global_(global.points), global_tree_(global.points) {
  if (local_.empty() || global_.empty()) throw EmptyCloud("chamfer term on empty cloud");
}

double ChamferTerm::evaluate(const ViewOffset& offset, OffsetGradient* grad) const {
  const Mat3 r = yaw_rotation(offset.yaw);
  const Mat3 dr = yaw_rotation_derivative(offset.yaw);

  std::vector<Vec3> transformed(local_.size());
  for (size_t i = 0; i < local_.size(); ++i)
    transformed[i] = r * local_[i] + offset.translation;

  const double inv_n = 1.0 / static_cast<double>(local_.size());
  const double inv_m = 1.0 / static_cast<double>(global_.size());
  if (grad) grad->setZero();

  double sum_lg = 0.0;
  for (size_t i = 0; i < transformed.size(); ++i) {
    double d2 = 0.0;
    const int j = global_tree_.nearest(transformed[i], &d2);
    sum_lg += d2;
    if (grad) {
      const Vec3 res = transformed[i] - global_[j];
      (*grad)[0] += 2.0 * inv_n * res.dot(dr * local_[i]);
      grad->tail<3>() += 2.0 * inv_n * res;
    }
  }

  const KdTree3 local_tree(transformed);
  double sum_gl = 0.0;
  for (size_t j = 0; j < global_.size(); ++j) {
    double d2 = 0.0;
    const int i = local_tree.nearest(global_[j], &d2);
    sum_gl += d2;
    if (grad) {
      const Vec3 res = transformed[i] - global_[j];
      (*grad)[0] += 2.0 * inv_m * res.dot(dr * local_[i]);
      grad->tail<3>() += 2.0 * inv_m * res;
    }
  }
  return sum_lg * inv_n + sum_gl * inv_m;
}

BaLossTerm::BaLossTerm(std::vector<LandmarkObservation> observations,
                       std::vector<Vec3> landmark_points, const Trajectory& traj)
    : obs_(std::move(observations)),
      landmarks_(std::move(landmark_points)),
      intrinsics_(traj.intrinsics) {
  if (obs_.empty()) throw EmptyObservations("no landmark observations");
  poses_.reserve(obs_.size());
  for (const LandmarkObservation& o : obs_) {
    if (o.landmark < 0 || o.landmark >= static_cast<int>(landmarks_.size()))
      throw InvalidArgument("landmark id outside the landmark table");
    if (o.frame < 0 || o.frame >= static_cast<int>(traj.size()))
      throw InvalidArgument("landmark observation frame outside the trajectory");
    poses_.push_back(traj.frames[o.frame].pose);
  }
}

double BaLossTerm::evaluate(const ViewOffset& offset, OffsetGradient* grad,
                            int* dropped) const {
  const Mat3 r_t = yaw_rotation(offset.yaw).transpose();
  const Mat3 dr_t = yaw_rotation_derivative(offset.yaw).transpose();
  if (grad) grad->setZero();

  double sum = 0.0;
  int included = 0;
  int skipped = 0;
  struct TermGrad {
    double d_yaw;
    Vec3 d_t;
  };
  std::vector<TermGrad> term_grads;
  if (grad) term_grads.reserve(obs_.size());

  for (size_t i = 0; i < obs_.size(); ++i) {
    const Vec3 shifted = landmarks_[obs_[i].landmark] - offset.translation;
    const Vec3 x_local = r_t * shifted;  // landmark pulled back into the view frame
    const Pose& pose = poses_[i];
    const Vec3 p_cam = pose.to_camera(x_local);
    if (!(p_cam.z() > 1e-9)) {
      ++skipped;
      continue;
    }
    const double iz = 1.0 / p_cam.z();
    const Vec2 u(intrinsics_.fx * p_cam.x() * iz + intrinsics_.cx,
                 intrinsics_.fy * p_cam.y() * iz + intrinsics_.cy);
    const Vec2 res = u - obs_[i].pixel;
    sum += res.squaredNorm();
    ++included;
    if (grad) {
      Eigen::Matrix<double, 2, 3> j_proj;
      j_proj << intrinsics_.fx * iz, 0.0, -intrinsics_.fx * p_cam.x() * iz * iz,
          0.0, intrinsics_.fy * iz, -intrinsics_.fy * p_cam.y() * iz * iz;
      const Eigen::Matrix<double, 2, 3> j_local = j_proj * pose.rotation;
      const Vec2 two_res = 2.0 * res;
      TermGrad tg;
      tg.d_yaw = two_res.dot(j_local * (dr_t * shifted));
      tg.d_t = -(j_local * r_t).transpose() * two_res;
      term_grads.push_back(tg);
    }
  }
  if (dropped) *dropped = skipped;
  if (included == 0) return 0.0;

  const double inv_n = 1.0 / static_cast<double>(included);
  if (grad) {
    for (const TermGrad& tg : term_grads) {
      (*grad)[0] += inv_n * tg.d_yaw;
      grad->tail<3>() += inv_n * tg.d_t;
    }
  }
  return sum * inv_n;
}

double track_loss(const std::vector<TrackedCorrespondence>& correspondences,
                  const std::array<ViewOffset, 2>& offsets,
                  const Trajectory& traj_a, const Trajectory& traj_b) {
  return TrackLossTerm(correspondences, traj_a, traj_b)
      .evaluate(offsets[0], offsets[1]);
}

double ba_loss(const std::vector<LandmarkObservation>& observations,
               const std::vector<Vec3>& landmark_points, const ViewOffset& offset,
               const Trajectory& traj, int* dropped) {
  return BaLossTerm(observations, landmark_points, traj).evaluate(offset, nullptr, dropped);
}

CompositeBreakdown composite_loss(const LossWeights& w, std::optional<double> track_value,
                                  const std::vector<double>& chamfer_values,
                                  const std::vector<double>& ba_values) {
  w.validate();
  CompositeBreakdown out;
  out.track = track_value.value_or(0.0);
  out.chamfer = chamfer_values;
  out.ba = ba_values;
  double total = track_value ? w.track * (*track_value) : 0.0;
  for (double c : chamfer_values) total += w.chamfer * c;
  for (double b : ba_values) total += w.ba * b;
  out.total = total;
  return out;
}

}  // namespace wfm
