#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "wfm/calibration.hpp"
#include "wfm/fusion.hpp"
#include "wfm/geometry.hpp"
#include "wfm/losses.hpp"
#include "wfm/metrics.hpp"
#include "wfm/motion_fit.hpp"
#include "wfm/skeleton.hpp"
#include "wfm/triangulation.hpp"

namespace wfm::synth {

struct Primitive {
  enum class Kind { kBox, kSphere, kRect };
  Kind kind = Kind::kBox;
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Ones();  // sphere: radius in x(); rect: extents off-axis
  int axis = 2;                      // rect normal axis
};

struct Scene {
  std::vector<Primitive> primitives;
  SceneClass scene_class = SceneClass::kIndoor;
};

/// Nearest positive ray parameter hitting any primitive, or +inf.
double cast_ray(const Scene& scene, const Vec3& origin, const Vec3& direction);

/// Unsigned distance from a point to the scene surfaces.
double surface_distance(const Scene& scene, const Vec3& p);

/// Analytic depth render of the scene primitives (humans never appear).
DepthFrame render_depth(const Scene& scene, const Pose& pose, const Intrinsics& intrinsics,
                        SceneClass scene_class);

/// World-to-camera pose looking from eye toward target, z forward, y down.
Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3(0, 0, 1));

/// Exact triangle mesh of the scene primitives (icospheres for spheres).
TriangleMesh primitive_mesh(const Scene& scene);

struct SceneSpec {
  SceneClass scene_class = SceneClass::kIndoor;
  double extent = 3.0;  // floor half-extent; indoor scenes add walls
  int box_count = 2;
  int sphere_count = 1;
};

struct MotionSpec {
  enum class Kind { kWalk, kSit };
  Kind kind = Kind::kWalk;
  int frame_count = 60;
  double fps = 30.0;
  int stand_frames = 8;  // idle frames at both ends; contact anchors live here
  double speed = 0.9;    // m/s
};

struct CameraSpec {
  double baseline_deg = 90.0;  // capture guidance: keep within 60-120
  double distance = 2.8;
  double height = 1.7;
  double orbit_amplitude = 0.25;  // azimuth sway, radians
  double fx = 600.0, fy = 600.0;
  int width = 480, image_height = 640;
};

struct BundleSpec {
  SceneSpec scene;
  MotionSpec motion;
  CameraSpec cameras;
  int track_points_per_frame = 30;
  int landmark_count = 60;
  int landmark_stride = 2;
  int global_cloud_points = 2500;
  int registered_stride = 5;
  bool randomize_offsets = true;  // per-view true offsets drawn from the seed
  bool ambiguity = false;         // wall-only landmarks, floor-only cloud
  int scan_keyframes = 0;         // depth keyframes for fusion (0 = skip)
  int depth_width = 96, depth_height = 128;
};

struct NoiseSpec {
  double keypoint_sigma_px = 0.0;  // keypoint and track pixels
  double landmark_sigma_px = 0.0;  // landmark observation pixels
  double depth_sigma_rel = 0.0;    // track depths, scan rasters, depth samples
  double traj_sigma_m = 0.0;       // view trajectories and registered poses
  double traj_sigma_rad = 0.0;
  double dropout = 0.0;            // confidence zeroing rate
  double cloud_sigma_m = 0.0;      // local and global clouds
};

struct ViewBundle {
  Trajectory trajectory_scene;  // ground truth, scene frame
  Trajectory trajectory_view;   // device frame (true offset removed)
  std::vector<std::pair<int, Pose>> registered;
  std::vector<Keypoint2DFrame> keypoints;
  PointCloud cloud_view;  // device frame
  std::vector<LandmarkObservation> landmark_obs;
};

struct Bundle {
  uint64_t seed = 0;
  Scene scene;
  TriangleMesh scene_mesh;
  SkeletonModel skeleton;
  SkeletonParams gt_params;
  std::vector<std::vector<Vec3>> gt_joints;  // frames × J, scene frame
  std::array<ViewOffset, 2> true_offsets;
  std::array<ViewBundle, 2> views;
  std::vector<TrackedCorrespondence> tracks;
  std::vector<Vec3> landmark_points;  // scene frame
  PointCloud global_cloud;            // scene frame
  ContactAnnotation contacts;
  std::vector<DepthFrame> scan;  // scene-frame depth keyframes
  std::vector<DepthSample> depth_samples;
};

/// Deterministic ground-truth world: same (seed, spec) gives a bit-identical
/// bundle whose observations are exactly consistent with the ground truth.
Bundle generate(uint64_t seed, const BundleSpec& spec);

/// Additive Gaussian noise per the given levels; ground truth stays untouched.
Bundle perturb(const Bundle& bundle, const NoiseSpec& noise, uint64_t seed);

/// Wiring helpers for the calibration and evaluation surfaces.
CalibrationInput to_calibration_input(const Bundle& bundle);
JointSequence gt_joint_sequence(const Bundle& bundle);

}  // namespace wfm::synth
