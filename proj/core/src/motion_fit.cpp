#include "wfm/motion_fit.hpp"

#include <cmath>

#include "wfm/alignment.hpp"

namespace wfm {

namespace {

Vec3 wrap_axis_angle(const Vec3& aa) {
  const double theta = aa.norm();
  if (theta <= M_PI || theta < 1e-12) return aa;
  const double wrapped = wrap_angle(theta);  // in (-pi, pi]
  return aa * (wrapped / theta);
}

struct FitProblem {
  const SkeletonModel& model;
  const std::vector<Keypoint3DFrame>& joints3d;
  const std::vector<std::vector<Keypoint2DFrame>>& keypoints;
  const std::vector<Trajectory>& trajectories;
  std::vector<Eigen::VectorXd> prior_body;  // init body pose per frame
  FitWeights weights;

  int frame_count = 0;
  int joint_count = 0;
  int block = 0;  // per-frame parameter count
  int valid_total = 0;

  FitProblem(const SkeletonModel& m, const std::vector<Keypoint3DFrame>& k3d,
             const std::vector<std::vector<Keypoint2DFrame>>& k2d,
             const std::vector<Trajectory>& trajs, const SkeletonParams& init,
             const FitWeights& w)
      : model(m), joints3d(k3d), keypoints(k2d), trajectories(trajs), weights(w) {
    frame_count = static_cast<int>(k3d.size());
    joint_count = m.joint_count();
    block = 3 * joint_count + 3;
    if (frame_count == 0) throw EmptyInput("no frames to fit");
    if (static_cast<int>(init.frames.size()) != frame_count)
      throw SizeMismatch("init frame count differs from keypoint frames");
    for (int t = 0; t < frame_count; ++t) {
      if (static_cast<int>(joints3d[t].joints.size()) != joint_count)
        throw SizeMismatch("triangulated joint count differs from the skeleton");
      int valid = 0;
      for (const TriangulatedJoint& j : joints3d[t].joints)
        if (j.valid()) ++valid;
      if (valid == 0)
        throw NoValidJoints("frame " + std::to_string(t) + " has no valid 3D joint");
      valid_total += valid;
      prior_body.push_back(init.frames[t].body_pose);
    }
    for (const auto& stream : keypoints)
      if (static_cast<int>(stream.size()) != frame_count)
        throw FrameMisalignment("keypoint stream length differs from fit frames");
    if (keypoints.size() != trajectories.size())
      throw SizeMismatch("one trajectory per keypoint stream required");
    for (const Trajectory& t : trajectories)
      if (static_cast<int>(t.size()) < frame_count)
        throw FrameMisalignment("trajectory shorter than the fitted sequence");
  }

  int size() const { return SkeletonModel::kShapeDim + frame_count * block; }

  Eigen::VectorXd pack(const SkeletonParams& p) const {
    Eigen::VectorXd x(size());
    x.head<SkeletonModel::kShapeDim>() = p.shape;
    for (int t = 0; t < frame_count; ++t) {
      const int off = SkeletonModel::kShapeDim + t * block;
      x.segment<3>(off) = p.frames[t].global_orientation;
      x.segment(off + 3, 3 * (joint_count - 1)) = p.frames[t].body_pose;
      x.segment<3>(off + 3 * joint_count) = p.frames[t].root_translation;
    }
    return x;
  }

  SkeletonParams unpack(const Eigen::VectorXd& x) const {
    SkeletonParams p;
    p.shape = x.head<SkeletonModel::kShapeDim>();
    p.frames.resize(frame_count);
    for (int t = 0; t < frame_count; ++t) {
      const int off = SkeletonModel::kShapeDim + t * block;
      p.frames[t].global_orientation = wrap_axis_angle(x.segment<3>(off));
      p.frames[t].body_pose = x.segment(off + 3, 3 * (joint_count - 1));
      for (int j = 0; j + 1 < joint_count; ++j)
        p.frames[t].body_pose.segment<3>(3 * j) =
            wrap_axis_angle(p.frames[t].body_pose.segment<3>(3 * j));
      p.frames[t].root_translation = x.segment<3>(off + 3 * joint_count);
    }
    return p;
  }

  FramePose frame_pose(const Eigen::VectorXd& x, int t) const {
    const int off = SkeletonModel::kShapeDim + t * block;
    FramePose f;
    f.global_orientation = x.segment<3>(off);
    f.body_pose = x.segment(off + 3, 3 * (joint_count - 1));
    f.root_translation = x.segment<3>(off + 3 * joint_count);
    return f;
  }

  double operator()(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
    const bool want_grad = grad.size() == x.size();
    const Eigen::VectorXd shape = x.head<SkeletonModel::kShapeDim>();

    std::vector<FkResult> fk(frame_count);
    std::vector<Eigen::MatrixXd> jac(want_grad ? frame_count : 0);
    for (int t = 0; t < frame_count; ++t) {
      const FramePose f = frame_pose(x, t);
      fk[t] = want_grad ? forward_kinematics_with_jacobian(model, shape, f, jac[t])
                        : forward_kinematics(model, shape, f);
    }

    // d(loss)/d(joint positions), per frame; folded through the FK Jacobians
    // at the end.
    std::vector<Eigen::VectorXd> g_pos;
    if (want_grad) g_pos.assign(frame_count, Eigen::VectorXd::Zero(3 * joint_count));

    double l_kp3d = 0.0;
    const double kp3d_norm = 1.0 / static_cast<double>(valid_total);
    for (int t = 0; t < frame_count; ++t) {
      for (int j = 0; j < joint_count; ++j) {
        const TriangulatedJoint& y = joints3d[t].joints[j];
        if (!y.valid()) continue;
        const Vec3 r = fk[t].positions[j] - y.position;
        l_kp3d += r.squaredNorm();
        if (want_grad)
          g_pos[t].segment<3>(3 * j) +=
              weights.kp3d * kp3d_norm * 2.0 * r;
      }
    }
    l_kp3d *= kp3d_norm;

    double l_smooth = 0.0;
    const int pose_dims = 3 * joint_count;
    Eigen::VectorXd g_params;  // direct (non-position) gradient terms
    if (want_grad) g_params = Eigen::VectorXd::Zero(x.size());
    if (frame_count > 1) {
      const double norm_t = 1.0 / static_cast<double>(frame_count - 1);
      const double norm_j = 1.0 / static_cast<double>(joint_count);
      const double norm_p = 1.0 / static_cast<double>(pose_dims);
      for (int t = 0; t + 1 < frame_count; ++t) {
        for (int j = 0; j < joint_count; ++j) {
          const Vec3 dp = fk[t + 1].positions[j] - fk[t].positions[j];
          l_smooth += norm_t * norm_j * dp.squaredNorm();
          if (want_grad) {
            const Vec3 g = weights.smooth * norm_t * norm_j * 2.0 * dp;
            g_pos[t + 1].segment<3>(3 * j) += g;
            g_pos[t].segment<3>(3 * j) -= g;
          }
        }
        const int off_a = SkeletonModel::kShapeDim + t * block;
        const int off_b = SkeletonModel::kShapeDim + (t + 1) * block;
        const Eigen::VectorXd dtheta =
            x.segment(off_b, pose_dims) - x.segment(off_a, pose_dims);
        l_smooth += norm_t * norm_p * dtheta.squaredNorm();
        if (want_grad) {
          const Eigen::VectorXd g = weights.smooth * norm_t * norm_p * 2.0 * dtheta;
          g_params.segment(off_b, pose_dims) += g;
          g_params.segment(off_a, pose_dims) -= g;
        }
      }
    }

    double l_prior = 0.0;
    const double prior_norm =
        1.0 / static_cast<double>(frame_count * 3 * (joint_count - 1));
    for (int t = 0; t < frame_count; ++t) {
      const int off = SkeletonModel::kShapeDim + t * block + 3;
      const Eigen::VectorXd d = x.segment(off, 3 * (joint_count - 1)) - prior_body[t];
      l_prior += prior_norm * d.squaredNorm();
      if (want_grad)
        g_params.segment(off, 3 * (joint_count - 1)) +=
            weights.prior * prior_norm * 2.0 * d;
    }

    // Confidence-weighted squared pixel residual of the projected joints.
    double l_reproj = 0.0;
    if (!keypoints.empty()) {
      double reproj_sum = 0.0;
      double conf_sum = 0.0;
      struct Contribution {
        int t, j;
        Vec3 g;
      };
      std::vector<Contribution> contributions;
      for (size_t v = 0; v < keypoints.size(); ++v) {
        const Trajectory& traj = trajectories[v];
        for (int t = 0; t < frame_count; ++t) {
          const Keypoint2DFrame& kf = keypoints[v][t];
          const Pose& pose = traj.frames[t].pose;
          for (int j = 0; j < joint_count; ++j) {
            const double c = kf.confidences[j];
            if (!(c > 0.0)) continue;
            const Vec3 p_cam = pose.to_camera(fk[t].positions[j]);
            if (!(p_cam.z() > 1e-9)) continue;  // behind camera, dropped
            const double iz = 1.0 / p_cam.z();
            const Intrinsics& in = traj.intrinsics;
            const Vec2 u(in.fx * p_cam.x() * iz + in.cx, in.fy * p_cam.y() * iz + in.cy);
            const Vec2 r = u - kf.pixels[j];
            reproj_sum += c * r.squaredNorm();
            conf_sum += c;
            if (want_grad) {
              Eigen::Matrix<double, 2, 3> j_proj;
              j_proj << in.fx * iz, 0.0, -in.fx * p_cam.x() * iz * iz, 0.0, in.fy * iz,
                  -in.fy * p_cam.y() * iz * iz;
              contributions.push_back(
                  {t, j, (j_proj * pose.rotation).transpose() * (2.0 * c * r)});
            }
          }
        }
      }
      if (conf_sum > 0.0) {
        l_reproj = reproj_sum / conf_sum;
        if (want_grad) {
          const double s = weights.reproj / conf_sum;
          for (const Contribution& c : contributions)
            g_pos[c.t].segment<3>(3 * c.j) += s * c.g;
        }
      }
    }

    if (want_grad) {
      grad = g_params;
      for (int t = 0; t < frame_count; ++t) {
        const Eigen::VectorXd folded = jac[t].transpose() * g_pos[t];
        grad.head<SkeletonModel::kShapeDim>() +=
            folded.head<SkeletonModel::kShapeDim>();
        grad.segment(SkeletonModel::kShapeDim + t * block, block) +=
            folded.tail(block);
      }
    }

    const double total = weights.kp3d * l_kp3d + weights.smooth * l_smooth +
                         weights.prior * l_prior + weights.reproj * l_reproj;
    return total;
  }
};

double fd_check(const FitProblem& problem, const Eigen::VectorXd& x0) {
  Eigen::VectorXd analytic(x0.size());
  analytic.setZero();
  problem(x0, analytic);
  Eigen::VectorXd fd(x0.size());
  Eigen::VectorXd none;
  for (int i = 0; i < x0.size(); ++i) {
    Eigen::VectorXd xp = x0, xm = x0;
    xp[i] += 1e-6;
    xm[i] -= 1e-6;
    fd[i] = (problem(xp, none) - problem(xm, none)) / 2e-6;
  }
  return (analytic - fd).norm() / std::max(fd.norm(), 1e-12);
}

}  // namespace

FitResult fit_motion(const SkeletonModel& model,
                     const std::vector<Keypoint3DFrame>& joints3d,
                     const std::vector<std::vector<Keypoint2DFrame>>& keypoints_per_view,
                     const std::vector<Trajectory>& trajectories,
                     const SkeletonParams& init, const FitConfig& config) {
  model.validate();
  FitProblem problem(model, joints3d, keypoints_per_view, trajectories, init,
                     config.weights);
  const Eigen::VectorXd x0 = problem.pack(init);

  FitResult result;
  {
    Eigen::VectorXd none;
    result.initial_loss = problem(x0, none);
  }
  if (config.check_gradient) {
    result.gradient_check_error = fd_check(problem, x0);
    if (result.gradient_check_error > 1e-4)
      throw GradientCheckFailed("fit gradient disagrees with finite differences");
  }

  // Stage 1: shape and root translation only.
  std::vector<bool> frozen(problem.size(), false);
  for (int t = 0; t < problem.frame_count; ++t) {
    const int off = SkeletonModel::kShapeDim + t * problem.block;
    for (int i = 0; i < 3 * problem.joint_count; ++i) frozen[off + i] = true;
  }
  const auto fn = [&problem](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    return problem(x, g);
  };
  const AdamResult stage1 = adam_minimize(fn, x0, config.stage1, {}, frozen);
  const AdamResult stage2 = adam_minimize(fn, stage1.best_params, config.stage2);

  result.params = problem.unpack(stage2.best_params);
  result.final_loss = stage2.best_loss;
  result.stage1_history = stage1.history;
  result.stage2_history = stage2.history;
  result.aborted_non_finite = stage1.aborted_non_finite || stage2.aborted_non_finite;
  return result;
}

double fit_loss(const SkeletonModel& model, const std::vector<Keypoint3DFrame>& joints3d,
                const std::vector<std::vector<Keypoint2DFrame>>& keypoints_per_view,
                const std::vector<Trajectory>& trajectories, const SkeletonParams& init,
                const SkeletonParams& at, const FitWeights& weights) {
  FitProblem problem(model, joints3d, keypoints_per_view, trajectories, init, weights);
  Eigen::VectorXd none;
  return problem(problem.pack(at), none);
}

ContactAlignResult contact_align(const SkeletonModel& model, const SkeletonParams& params,
                                 const std::vector<Trajectory>& trajectories,
                                 const ContactAnnotation& annotation,
                                 const AdamOptions& options) {
  if (annotation.markers.empty()) throw NoContactFrames();
  const std::vector<int> feet = model.foot_joints();
  const std::vector<int> toes = model.toe_joints();

  struct Anchor {
    Vec3 mid;        // feet midpoint at the contact frame
    double min_z;    // lowest foot point
    Vec2 marker_xy;
    double marker_z;
  };
  std::vector<Anchor> anchors;
  for (const ContactMarker& m : annotation.markers) {
    if (m.frame < 0 || m.frame >= static_cast<int>(params.frames.size()))
      throw InvalidArgument("contact frame outside the sequence");
    const FkResult fk = forward_kinematics(model, params.shape, params.frames[m.frame]);
    Anchor a;
    a.mid = 0.5 * (fk.positions[toes[0]] + fk.positions[toes[1]]);
    a.min_z = fk.positions[feet[0]].z();
    for (int j : feet) a.min_z = std::min(a.min_z, fk.positions[j].z());
    a.marker_xy = m.position.head<2>();
    a.marker_z = m.z;
    anchors.push_back(a);
  }

  const double inv_n = 1.0 / static_cast<double>(anchors.size());
  const auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    const double yaw = x[0];
    const Vec3 t = x.segment<3>(1);
    const Mat3 r = yaw_rotation(yaw);
    const Mat3 dr = yaw_rotation_derivative(yaw);
    const bool want_grad = grad.size() == x.size();
    double loss = 0.0;
    for (const Anchor& a : anchors) {
      const Vec3 moved = r * a.mid + t;
      const Vec2 r_xy = moved.head<2>() - a.marker_xy;
      const double r_z = a.min_z + t.z() - a.marker_z;
      loss += inv_n * (r_xy.squaredNorm() + r_z * r_z);
      if (want_grad) {
        const Vec2 g_xy = 2.0 * inv_n * r_xy;
        grad[0] += g_xy.dot((dr * a.mid).head<2>());
        grad[1] += g_xy.x();
        grad[2] += g_xy.y();
        grad[3] += 2.0 * inv_n * r_z;
      }
    }
    return loss;
  };

  const AdamResult adam =
      adam_minimize(objective, Eigen::VectorXd::Zero(4), options);

  // Descent polish: centering eliminates the translation, leaving a closed
  // 2D alignment for the yaw; the optimal translation then follows. Falls
  // back to the descent iterate when the yaw is unobservable (one marker).
  Eigen::VectorXd best = adam.best_params;
  {
    Vec2 mid_mean = Vec2::Zero(), marker_mean = Vec2::Zero();
    for (const Anchor& a : anchors) {
      mid_mean += a.mid.head<2>();
      marker_mean += a.marker_xy;
    }
    mid_mean *= inv_n;
    marker_mean *= inv_n;
    double trace_part = 0.0, skew_part = 0.0;
    for (const Anchor& a : anchors) {
      const Vec2 s = a.mid.head<2>() - mid_mean;
      const Vec2 d = a.marker_xy - marker_mean;
      trace_part += s.dot(d);
      skew_part += s.x() * d.y() - s.y() * d.x();
    }
    if (std::hypot(trace_part, skew_part) > 1e-15)
      best[0] = std::atan2(skew_part, trace_part);

    const Mat3 r = yaw_rotation(best[0]);
    Vec2 t_xy = Vec2::Zero();
    double t_z = 0.0;
    for (const Anchor& a : anchors) {
      t_xy += a.marker_xy - (r * a.mid).head<2>();
      t_z += a.marker_z - a.min_z;
    }
    best[1] = t_xy.x() * inv_n;
    best[2] = t_xy.y() * inv_n;
    best[3] = t_z * inv_n;
  }

  ContactAlignResult out;
  out.yaw = wrap_angle(best[0]);
  out.translation = best.segment<3>(1);
  out.history = adam.history;

  const Mat3 r_c = yaw_rotation(out.yaw);
  out.params = params;
  for (size_t t = 0; t < params.frames.size(); ++t) {
    const FramePose& f = params.frames[t];
    FramePose& g = out.params.frames[t];
    g.global_orientation =
        matrix_to_axis_angle(r_c * axis_angle_to_matrix(f.global_orientation));
    const Vec3 pelvis_world = forward_kinematics(model, params.shape, f).positions[0];
    const Vec3 pelvis_new = r_c * pelvis_world + out.translation;
    FramePose probe = g;
    probe.root_translation = Vec3::Zero();
    const Vec3 pelvis_local = forward_kinematics(model, params.shape, probe).positions[0];
    g.root_translation = pelvis_new - pelvis_local;
  }

  const SimilarityTransform offset(1.0, r_c, out.translation);
  for (const Trajectory& traj : trajectories)
    out.trajectories.push_back(apply_offset_to_trajectory(traj, offset));
  return out;
}

}  // namespace wfm
