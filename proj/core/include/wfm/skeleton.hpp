#pragma once

#include <Eigen/Core>

#include <vector>

#include "wfm/geometry.hpp"

namespace wfm {

/// Kinematic tree with per-joint rest offsets whose lengths are modulated by a
/// 10-dimensional shape vector of bone-group scales.
struct SkeletonModel {
  static constexpr int kShapeDim = 10;

  std::vector<int> parents;        // parents[0] == -1 (pelvis root)
  std::vector<Vec3> rest_offsets;  // local bone vector from parent, root entry zero
  std::vector<int> shape_group;    // per joint, in [0, kShapeDim)

  int joint_count() const { return static_cast<int>(parents.size()); }
  /// Pose parameter dimension per frame: 3 global + 3 per non-root joint.
  int pose_dim() const { return 3 * joint_count(); }

  /// Bone scale exp(0.1 · β_group): positive for every shape vector.
  double bone_scale(const Eigen::VectorXd& shape, int joint) const;

  /// Joints treated as feet for contact and skating logic (ankles + toes).
  std::vector<int> foot_joints() const;
  std::vector<int> toe_joints() const;

  void validate() const;

  /// 24-joint body with the usual pelvis/spine/limbs topology, Z-up rest pose
  /// facing +x, arms along ±y.
  static SkeletonModel default_human();
};

/// Per-frame pose: axis-angle global orientation, stacked per-joint axis-angle
/// body pose, and the root (pelvis) world translation.
struct FramePose {
  Vec3 global_orientation = Vec3::Zero();
  Eigen::VectorXd body_pose;  // 3·(J-1)
  Vec3 root_translation = Vec3::Zero();
};

struct SkeletonParams {
  Eigen::VectorXd shape;  // kShapeDim
  std::vector<FramePose> frames;

  static SkeletonParams rest(const SkeletonModel& model, int frame_count);
};

struct FkResult {
  std::vector<Vec3> positions;     // world, J entries
  std::vector<Mat3> orientations;  // global joint rotations
};

/// Column layout of the per-frame FK Jacobian:
/// [shape(10) | global(3) | body(3·(J-1)) | root(3)].
struct FkLayout {
  static constexpr int kShape = 0;
  static constexpr int kGlobal = SkeletonModel::kShapeDim;
  static constexpr int kBody = kGlobal + 3;
  static int root_col(const SkeletonModel& m) { return kBody + 3 * (m.joint_count() - 1); }
  static int cols(const SkeletonModel& m) { return root_col(m) + 3; }
};

FkResult forward_kinematics(const SkeletonModel& model, const Eigen::VectorXd& shape,
                            const FramePose& pose);

/// FK plus the dense Jacobian of all joint positions (rows 3j..3j+2) w.r.t.
/// the FkLayout columns.
FkResult forward_kinematics_with_jacobian(const SkeletonModel& model,
                                          const Eigen::VectorXd& shape,
                                          const FramePose& pose,
                                          Eigen::MatrixXd& jacobian);

}  // namespace wfm
