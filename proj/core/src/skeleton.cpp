#include "wfm/skeleton.hpp"

#include <cmath>

namespace wfm {

double SkeletonModel::bone_scale(const Eigen::VectorXd& shape, int joint) const {
  return std::exp(0.1 * shape[shape_group[joint]]);
}

std::vector<int> SkeletonModel::foot_joints() const { return {7, 8, 10, 11}; }
std::vector<int> SkeletonModel::toe_joints() const { return {10, 11}; }

void SkeletonModel::validate() const {
  if (parents.empty() || parents[0] != -1)
    throw InvalidArgument("skeleton root must be joint 0 with parent -1");
  if (rest_offsets.size() != parents.size() || shape_group.size() != parents.size())
    throw SizeMismatch("skeleton field lengths disagree");
  for (size_t j = 1; j < parents.size(); ++j) {
    if (parents[j] < 0 || parents[j] >= static_cast<int>(j))
      throw InvalidArgument("parents must precede children");
    if (!(rest_offsets[j].norm() > 0.0))
      throw InvalidArgument("zero-length bone");
    if (shape_group[j] < 0 || shape_group[j] >= kShapeDim)
      throw InvalidArgument("shape group out of range");
  }
}

SkeletonModel SkeletonModel::default_human() {
  // 0 pelvis, 1/2 L/R hip, 3 spine1, 4/5 L/R knee, 6 spine2, 7/8 L/R ankle,
  // 9 spine3, 10/11 L/R toe, 12 neck, 13/14 L/R collar, 15 head,
  // 16/17 L/R shoulder, 18/19 L/R elbow, 20/21 L/R wrist, 22/23 L/R hand.
  SkeletonModel m;
  m.parents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};
  m.rest_offsets = {
      {0.0, 0.0, 0.0},        // pelvis
      {0.0, 0.09, -0.07},     // L hip
      {0.0, -0.09, -0.07},    // R hip
      {0.0, 0.0, 0.11},       // spine1
      {0.0, 0.0, -0.38},      // L knee
      {0.0, 0.0, -0.38},      // R knee
      {0.0, 0.0, 0.12},       // spine2
      {0.0, 0.0, -0.40},      // L ankle
      {0.0, 0.0, -0.40},      // R ankle
      {0.0, 0.0, 0.12},       // spine3
      {0.13, 0.0, -0.05},     // L toe
      {0.13, 0.0, -0.05},     // R toe
      {0.0, 0.0, 0.14},       // neck
      {0.0, 0.07, 0.06},      // L collar
      {0.0, -0.07, 0.06},     // R collar
      {0.0, 0.0, 0.10},       // head
      {0.0, 0.10, 0.02},      // L shoulder
      {0.0, -0.10, 0.02},     // R shoulder
      {0.0, 0.26, 0.0},       // L elbow
      {0.0, -0.26, 0.0},      // R elbow
      {0.0, 0.25, 0.0},       // L wrist
      {0.0, -0.25, 0.0},      // R wrist
      {0.0, 0.08, 0.0},       // L hand
      {0.0, -0.08, 0.0},      // R hand
  };
  m.shape_group = {0, 0, 0, 1, 7, 7, 1, 8, 8, 1, 9, 9, 2, 3, 3, 2, 3, 3, 4, 4, 5, 5, 6, 6};
  m.validate();
  return m;
}

SkeletonParams SkeletonParams::rest(const SkeletonModel& model, int frame_count) {
  SkeletonParams p;
  p.shape = Eigen::VectorXd::Zero(SkeletonModel::kShapeDim);
  p.frames.resize(frame_count);
  for (FramePose& f : p.frames)
    f.body_pose = Eigen::VectorXd::Zero(3 * (model.joint_count() - 1));
  return p;
}

FkResult forward_kinematics(const SkeletonModel& model, const Eigen::VectorXd& shape,
                            const FramePose& pose) {
  const int j_count = model.joint_count();
  FkResult out;
  out.positions.resize(j_count);
  out.orientations.resize(j_count);

  out.positions[0] = pose.root_translation;
  out.orientations[0] = axis_angle_to_matrix(pose.global_orientation);
  for (int j = 1; j < j_count; ++j) {
    const int p = model.parents[j];
    const Mat3 local = axis_angle_to_matrix(pose.body_pose.segment<3>(3 * (j - 1)));
    out.orientations[j] = out.orientations[p] * local;
    out.positions[j] =
        out.positions[p] +
        out.orientations[p] * (model.bone_scale(shape, j) * model.rest_offsets[j]);
  }
  return out;
}

FkResult forward_kinematics_with_jacobian(const SkeletonModel& model,
                                          const Eigen::VectorXd& shape,
                                          const FramePose& pose,
                                          Eigen::MatrixXd& jacobian) {
  const int j_count = model.joint_count();
  const FkResult fk = forward_kinematics(model, shape, pose);
  jacobian.setZero(3 * j_count, FkLayout::cols(model));

  // N(k,i) maps (pos_j - pos_k) to d pos_j / d theta_{k,i} for every strict
  // descendant j of joint k (k = 0 uses the global orientation).
  std::vector<std::array<Mat3, 3>> n(j_count);
  for (int i = 0; i < 3; ++i)
    n[0][i] = axis_angle_jacobian(pose.global_orientation, i) *
              fk.orientations[0].transpose();
  for (int k = 1; k < j_count; ++k) {
    const Vec3 aa = pose.body_pose.segment<3>(3 * (k - 1));
    const Mat3 parent_orient = fk.orientations[model.parents[k]];
    for (int i = 0; i < 3; ++i)
      n[k][i] = parent_orient * axis_angle_jacobian(aa, i) *
                fk.orientations[k].transpose();
  }

  for (int j = 0; j < j_count; ++j) {
    auto rows = jacobian.middleRows<3>(3 * j);
    rows.middleCols<3>(FkLayout::root_col(model)) = Mat3::Identity();
    // Rotation columns: walk the ancestor chain.
    for (int i = 0; i < 3; ++i)
      rows.col(FkLayout::kGlobal + i) = n[0][i] * (fk.positions[j] - fk.positions[0]);
    int k = j;
    while (k > 0) {
      for (int i = 0; i < 3; ++i)
        rows.col(FkLayout::kBody + 3 * (k - 1) + i) =
            n[k][i] * (fk.positions[j] - fk.positions[k]);
      // Shape columns accumulate each chain bone's scaled offset.
      const int p = model.parents[k];
      rows.col(FkLayout::kShape + model.shape_group[k]) +=
          0.1 * model.bone_scale(shape, k) * (fk.orientations[p] * model.rest_offsets[k]);
      k = p;
    }
  }
  return fk;
}

}  // namespace wfm
