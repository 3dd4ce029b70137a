#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "wfm/alignment.hpp"
#include "wfm/calibration.hpp"
#include "wfm/fusion.hpp"
#include "wfm/geometry.hpp"
#include "wfm/mesh.hpp"
#include "wfm/metrics.hpp"
#include "wfm/motion_fit.hpp"
#include "wfm/synth.hpp"
#include "wfm/triangulation.hpp"

// File formats: JSON documents for trajectories (quaternions xyzw at the
// boundary, x_cam = R·x_world + T convention), keypoints, tracks, landmarks,
// offsets, skeleton parameters and reports; ASCII PLY for clouds and meshes;
// depth rasters as 16-bit millimeter PGM (P5, big-endian) or headered
// float32 (.f32d: magic "WFMD", little-endian uint32 width/height, float32
// meters). Writers are byte-deterministic given identical values.

namespace wfm::io {

void write_trajectory(const std::string& path, const Trajectory& trajectory);
Trajectory read_trajectory(const std::string& path);

void write_registered(const std::string& path,
                      const std::vector<std::pair<int, Pose>>& poses);
std::vector<std::pair<int, Pose>> read_registered(const std::string& path);

void write_keypoints(const std::string& path, const std::vector<Keypoint2DFrame>& frames);
std::vector<Keypoint2DFrame> read_keypoints(const std::string& path);

void write_tracks(const std::string& path,
                  const std::vector<TrackedCorrespondence>& tracks);
std::vector<TrackedCorrespondence> read_tracks(const std::string& path);

struct LandmarkData {
  std::vector<Vec3> points;
  std::map<std::string, std::vector<LandmarkObservation>> observations;  // view id keyed
};
void write_landmarks(const std::string& path, const LandmarkData& data);
LandmarkData read_landmarks(const std::string& path);

using NamedOffsets = std::vector<std::pair<std::string, ViewOffset>>;
void write_offsets(const std::string& path, const NamedOffsets& offsets);
NamedOffsets read_offsets(const std::string& path);

void write_point_cloud_ply(const std::string& path, const PointCloud& cloud);
PointCloud read_point_cloud_ply(const std::string& path);
void write_mesh_ply(const std::string& path, const TriangleMesh& mesh);
TriangleMesh read_mesh_ply(const std::string& path);

enum class DepthFormat { kPgmMillimeters, kFloat32 };
void write_depth_dir(const std::string& dir, const std::vector<DepthFrame>& frames,
                     DepthFormat format);
std::vector<DepthFrame> read_depth_dir(const std::string& dir);

void write_skeleton_params(const std::string& path, const SkeletonParams& params);
SkeletonParams read_skeleton_params(const std::string& path);

void write_keypoints3d(const std::string& path, const std::vector<Keypoint3DFrame>& frames);
std::vector<Keypoint3DFrame> read_keypoints3d(const std::string& path);

void write_joint_sequence(const std::string& path, const JointSequence& sequence);
JointSequence read_joint_sequence(const std::string& path);

void write_contacts(const std::string& path, const ContactAnnotation& annotation);
ContactAnnotation read_contacts(const std::string& path);

void write_chunk_alignment(const std::string& path, const ChunkAlignment& alignment);
ChunkAlignment read_chunk_alignment(const std::string& path);

void write_depth_samples(const std::string& path, const std::vector<DepthSample>& samples);
std::vector<DepthSample> read_depth_samples(const std::string& path);

/// Ordered name→value report (metrics and the like).
void write_report(const std::string& path,
                  const std::vector<std::pair<std::string, double>>& values);
std::vector<std::pair<std::string, double>> read_report(const std::string& path);

/// Tunables shared across subcommands; defaults here, manifest config
/// overrides these, explicit CLI flags override both.
struct PipelineConfig {
  LossWeights loss_weights;
  AdamOptions calib_adam;
  TriangulationConfig triangulation;
  FitWeights fit_weights;
  AdamOptions fit_stage1;
  AdamOptions fit_stage2;
  AdamOptions contact_adam;
  double fusion_voxel = 0.02;
  double fusion_truncation_factor = 4.0;
  double clean_min_component_fraction = 0.1;
  double clean_outlier_sigma = 3.0;
  int metrics_chunk = 100;
  double jitter_contact_height = 0.05;

  PipelineConfig();
};

struct ManifestView {
  std::string id;
  std::string trajectory;
  std::string keypoints;
  std::string cloud;
  std::string registered;
};

struct SessionManifest {
  std::vector<ManifestView> views;
  std::string tracks;
  std::string landmarks;
  std::string global_cloud;
  std::string depth_dir;
  std::string gt_joints;      // optional, for evaluation
  std::string contacts;       // optional
  std::string depth_samples;  // optional, observed joint-pixel depths
  int frame_offset = 0;   // view 2 lags view 1 by this many frames
  SceneClass scene_class = SceneClass::kIndoor;
  PipelineConfig config;
  std::string base_dir;  // directory of the manifest file; paths resolve against it
};

SessionManifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const SessionManifest& manifest);

/// Loaded per-view streams with the temporal frame offset applied: view 2's
/// first `frame_offset` frames are dropped and all streams are cut to the
/// common frame count.
struct Session {
  std::vector<std::string> view_ids;
  std::vector<Trajectory> trajectories;
  std::vector<std::vector<Keypoint2DFrame>> keypoints;
  std::vector<PointCloud> clouds;
  std::vector<std::vector<std::pair<int, Pose>>> registered;
  std::vector<std::vector<LandmarkObservation>> landmark_obs;
  std::vector<Vec3> landmark_points;
  std::vector<TrackedCorrespondence> tracks;
  PointCloud global_cloud;
  SceneClass scene_class = SceneClass::kIndoor;
};

Session load_session(const SessionManifest& manifest);

std::string join_path(const std::string& dir, const std::string& leaf);

}  // namespace wfm::io
