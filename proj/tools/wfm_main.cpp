// wfm - batch pipeline driver.
//
// Subcommands cover the full flow: synth (ground-truth worlds), fuse (depth
// to mesh), align-init (registration-based offsets), calibrate (offset
// refinement), triangulate, fit (skeleton), contact-align, stitch (chunked
// trajectories), metrics. Every stage reads/writes the documented JSON/PLY/
// raster formats and drops a run.log (config echo + timings; the log is the
// only non-deterministic artifact).
//
// Exit codes: 0 ok, 2 usage, 3 input/format, 4 numerical failure, 1 other.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "wfm/io.hpp"
#include "wfm/synth.hpp"

namespace fs = std::filesystem;
using namespace wfm;

namespace {

struct RunLog {
  std::ostringstream lines;
  std::string path;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  explicit RunLog(const std::string& out_dir) {
    fs::create_directories(out_dir);
    path = io::join_path(out_dir, "run.log");
  }
  template <typename T>
  void note(const std::string& key, const T& value) {
    lines << key << " = " << value << "\n";
  }
  ~RunLog() {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - started)
                        .count();
    lines << "elapsed_ms = " << ms << "\n";
    std::ofstream(path) << lines.str();
  }
};

std::string out_dir_of(const std::string& out_file) {
  const fs::path p(out_file);
  return p.has_parent_path() ? p.parent_path().string() : std::string(".");
}

void echo_adam(RunLog& log, const std::string& name, const AdamOptions& o) {
  log.note(name + ".learning_rate", o.learning_rate);
  log.note(name + ".max_iterations", o.max_iterations);
  log.note(name + ".clip_norm", o.clip_norm);
  log.note(name + ".tolerance", o.tolerance);
  log.note(name + ".window", o.window);
  log.note(name + ".lr_decay", o.lr_decay);
}

void write_history(const std::string& path, const std::vector<double>& history) {
  std::vector<std::pair<std::string, double>> rows;
  rows.reserve(history.size());
  char key[32];
  for (size_t i = 0; i < history.size(); ++i) {
    std::snprintf(key, sizeof(key), "iter_%06zu", i);
    rows.push_back({key, history[i]});
  }
  io::write_report(path, rows);
}

int find_view(const io::Session& session, const std::string& id) {
  for (size_t v = 0; v < session.view_ids.size(); ++v)
    if (session.view_ids[v] == id) return static_cast<int>(v);
  throw InvalidArgument("unknown view id: " + id);
}

io::NamedOffsets load_named_offsets(const std::string& path, const io::Session& session) {
  const io::NamedOffsets raw = io::read_offsets(path);
  io::NamedOffsets ordered;
  for (const std::string& id : session.view_ids) {
    bool found = false;
    for (const auto& [name, offset] : raw) {
      if (name == id) {
        ordered.push_back({name, offset});
        found = true;
        break;
      }
    }
    if (!found) throw InvalidArgument("offsets file lacks view " + id);
  }
  return ordered;
}

std::vector<Trajectory> scene_frame_trajectories(const io::Session& session,
                                                 const io::NamedOffsets& offsets) {
  std::vector<Trajectory> out;
  for (size_t v = 0; v < session.trajectories.size(); ++v)
    out.push_back(apply_offset_to_trajectory(session.trajectories[v],
                                             offsets[v].second.to_similarity()));
  return out;
}

// ----------------------------------------------------------------------------
// synth

struct SynthArgs {
  uint64_t seed = 7;
  std::string out;
  int frames = 60;
  std::string scene_class = "indoor";
  std::string preset = "default";
  std::string motion = "walk";
  double baseline_deg = 90.0;
  double orbit_amplitude = 0.25;
  int scan_keyframes = 0;
  std::string depth_format = "pgm";
  int frame_offset = 0;
  int chunked = 0;
  int chunk_overlap = 8;
  uint64_t noise_seed = 1;
  double noise_kp = 0.0, noise_landmark = 0.0, noise_depth = 0.0;
  double noise_traj_m = 0.0, noise_traj_rad = 0.0, dropout = 0.0, noise_cloud = 0.0;
};

void run_synth(const SynthArgs& args) {
  RunLog log(args.out);
  log.note("subcommand", "synth");
  log.note("seed", args.seed);

  synth::BundleSpec spec;
  spec.motion.frame_count = args.frames;
  spec.motion.kind = args.motion == "sit" ? synth::MotionSpec::Kind::kSit
                                          : synth::MotionSpec::Kind::kWalk;
  spec.scene.scene_class =
      args.scene_class == "outdoor" ? SceneClass::kOutdoor : SceneClass::kIndoor;
  spec.cameras.baseline_deg = args.baseline_deg;
  spec.cameras.orbit_amplitude = args.orbit_amplitude;
  spec.ambiguity = args.preset == "ambiguity";
  spec.scan_keyframes = args.scan_keyframes;

  synth::Bundle bundle = synth::generate(args.seed, spec);
  const synth::NoiseSpec noise{args.noise_kp,     args.noise_landmark,
                               args.noise_depth,  args.noise_traj_m,
                               args.noise_traj_rad, args.dropout,
                               args.noise_cloud};
  const bool noisy = args.noise_kp > 0 || args.noise_landmark > 0 ||
                     args.noise_depth > 0 || args.noise_traj_m > 0 ||
                     args.noise_traj_rad > 0 || args.dropout > 0 || args.noise_cloud > 0;
  if (noisy) {
    bundle = synth::perturb(bundle, noise, args.noise_seed);
    log.note("noise_seed", args.noise_seed);
  }

  io::SessionManifest manifest;
  manifest.scene_class = spec.scene.scene_class;
  manifest.frame_offset = args.frame_offset;

  for (int v = 0; v < 2; ++v) {
    const synth::ViewBundle& view = bundle.views[v];
    const std::string id = view.trajectory_scene.view_id;
    const std::string dir = io::join_path(args.out, id);
    fs::create_directories(dir);

    Trajectory traj = view.trajectory_view;
    std::vector<Keypoint2DFrame> keypoints = view.keypoints;
    std::vector<std::pair<int, Pose>> registered = view.registered;
    if (v == 1 && args.frame_offset > 0) {
      // Pad view 2 with lead-in frames the frame offset must drop again.
      std::vector<TrajectoryFrame> padded(args.frame_offset, traj.frames.front());
      padded.insert(padded.end(), traj.frames.begin(), traj.frames.end());
      traj.frames = std::move(padded);
      for (size_t i = 0; i < traj.frames.size(); ++i)
        traj.frames[i].timestamp = static_cast<double>(i) / spec.motion.fps;
      std::vector<Keypoint2DFrame> kp_padded(args.frame_offset, keypoints.front());
      kp_padded.insert(kp_padded.end(), keypoints.begin(), keypoints.end());
      keypoints = std::move(kp_padded);
      for (size_t i = 0; i < keypoints.size(); ++i)
        keypoints[i].frame = static_cast<int>(i);
      for (auto& [frame, pose] : registered) frame += args.frame_offset;
    }

    io::write_trajectory(io::join_path(dir, "trajectory.json"), traj);
    io::write_keypoints(io::join_path(dir, "keypoints.json"), keypoints);
    io::write_point_cloud_ply(io::join_path(dir, "cloud.ply"), view.cloud_view);
    io::write_registered(io::join_path(dir, "registered.json"), registered);

    io::ManifestView mv;
    mv.id = id;
    mv.trajectory = id + "/trajectory.json";
    mv.keypoints = id + "/keypoints.json";
    mv.cloud = id + "/cloud.ply";
    mv.registered = id + "/registered.json";
    manifest.views.push_back(mv);
  }

  io::write_tracks(io::join_path(args.out, "tracks.json"), bundle.tracks);
  io::LandmarkData landmarks;
  landmarks.points = bundle.landmark_points;
  landmarks.observations["v1"] = bundle.views[0].landmark_obs;
  landmarks.observations["v2"] = bundle.views[1].landmark_obs;
  io::write_landmarks(io::join_path(args.out, "landmarks.json"), landmarks);
  io::write_point_cloud_ply(io::join_path(args.out, "global_cloud.ply"),
                            bundle.global_cloud);
  manifest.tracks = "tracks.json";
  manifest.landmarks = "landmarks.json";
  manifest.global_cloud = "global_cloud.ply";

  if (!bundle.scan.empty()) {
    io::write_depth_dir(io::join_path(args.out, "scan"), bundle.scan,
                        args.depth_format == "f32" ? io::DepthFormat::kFloat32
                                                   : io::DepthFormat::kPgmMillimeters);
    manifest.depth_dir = "scan";
  }

  const std::string gt_dir = io::join_path(args.out, "gt");
  fs::create_directories(gt_dir);
  io::write_offsets(io::join_path(gt_dir, "offsets.json"),
                    {{"v1", bundle.true_offsets[0]}, {"v2", bundle.true_offsets[1]}});
  io::write_skeleton_params(io::join_path(gt_dir, "params.json"), bundle.gt_params);
  io::write_joint_sequence(io::join_path(gt_dir, "joints.json"),
                           synth::gt_joint_sequence(bundle));
  io::write_mesh_ply(io::join_path(gt_dir, "scene_mesh.ply"), bundle.scene_mesh);
  io::write_contacts(io::join_path(args.out, "contacts.json"), bundle.contacts);
  io::write_depth_samples(io::join_path(args.out, "depth_samples.json"),
                          bundle.depth_samples);
  manifest.gt_joints = "gt/joints.json";
  manifest.contacts = "contacts.json";
  manifest.depth_samples = "depth_samples.json";

  if (args.chunked > 1) {
    // Overlapping slices of the view-1 scene trajectory, each in its own
    // random frame, plus the ground-truth chunk-to-first alignments.
    const std::string chunk_dir = io::join_path(args.out, "chunks");
    fs::create_directories(chunk_dir);
    const Trajectory& full = bundle.views[0].trajectory_scene;
    const int overlap = args.chunk_overlap;
    const int len =
        (static_cast<int>(full.size()) + (args.chunked - 1) * overlap) / args.chunked;
    std::mt19937_64 rng(args.seed ^ 0xC4A5);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    ChunkAlignment gt;
    for (int k = 0; k < args.chunked; ++k) {
      const int begin = k * (len - overlap);
      const int end = std::min(begin + len, static_cast<int>(full.size()));
      if (end - begin < overlap + 1) break;
      Trajectory chunk;
      chunk.view_id = "chunk" + std::to_string(k);
      chunk.intrinsics = full.intrinsics;
      for (int i = begin; i < end; ++i) chunk.frames.push_back(full.frames[i]);
      for (size_t i = 0; i < chunk.frames.size(); ++i)
        chunk.frames[i].timestamp = static_cast<double>(i) / spec.motion.fps;
      SimilarityTransform to_global = SimilarityTransform::identity();
      if (k > 0) {
        const double yaw = unif(rng);
        to_global = SimilarityTransform(
            std::exp(0.4 * unif(rng)), yaw_rotation(yaw),
            Vec3(unif(rng), unif(rng), 0.3 * unif(rng)));
        const SimilarityTransform inv = to_global.inverse();
        for (TrajectoryFrame& f : chunk.frames) {
          const Vec3 c = apply_similarity(inv, f.pose.center());
          f.pose = Pose(f.pose.rotation, -(f.pose.rotation * c));
        }
      }
      gt.per_chunk.push_back(SimilarityTransform::identity());  // filled below
      gt.cumulative.push_back(to_global);
      io::write_trajectory(
          io::join_path(chunk_dir, "chunk" + std::to_string(k) + ".json"), chunk);
    }
    for (size_t k = 0; k < gt.cumulative.size(); ++k)
      gt.per_chunk[k] = k == 0 ? SimilarityTransform::identity()
                               : gt.cumulative[k - 1].inverse().compose(gt.cumulative[k]);
    io::write_chunk_alignment(io::join_path(gt_dir, "chunk_alignment.json"), gt);
    log.note("chunks", gt.cumulative.size());
  }

  io::write_manifest(io::join_path(args.out, "manifest.json"), manifest);
  log.note("frames", args.frames);
  log.note("tracks", bundle.tracks.size());
  log.note("landmarks", bundle.landmark_points.size());
  std::cout << "synth: wrote bundle to " << args.out << "\n";
}

// ----------------------------------------------------------------------------
// fuse

void run_fuse(const io::SessionManifest& manifest, const std::string& out,
              double voxel, double trunc_factor, double min_component,
              double outlier_sigma) {
  RunLog log(out_dir_of(out));
  log.note("subcommand", "fuse");
  log.note("voxel", voxel);
  log.note("truncation_factor", trunc_factor);
  if (manifest.depth_dir.empty()) throw InvalidArgument("manifest has no depth_dir");
  const std::vector<DepthFrame> frames =
      io::read_depth_dir(io::join_path(manifest.base_dir, manifest.depth_dir));
  if (frames.empty()) throw EmptyInput("depth directory holds no frames");
  log.note("depth_frames", frames.size());

  // Volume bounds from a subsample of back-projected depth pixels.
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const DepthFrame& f : frames) {
    for (int y = 0; y < f.height; y += 4) {
      for (int x = 0; x < f.width; x += 4) {
        const double d = f.at(x, y);
        if (!(d > 0.0)) continue;
        const Vec3 p = backproject(Vec2(x + 0.5, y + 0.5), d, f.pose, f.intrinsics);
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
    }
  }
  if (!(lo.x() < hi.x())) throw EmptyInput("no valid depth samples");
  const double margin = trunc_factor * voxel;
  lo -= Vec3::Constant(2.0 * margin);
  hi += Vec3::Constant(2.0 * margin);
  const Eigen::Vector3i dims = ((hi - lo) / voxel).array().ceil().cast<int>().max(2);
  log.note("volume_dims", dims.transpose());
  const long long voxels =
      static_cast<long long>(dims.x()) * dims.y() * dims.z();
  if (voxels > 40'000'000)
    throw InvalidArgument("volume of " + std::to_string(voxels) +
                          " voxels exceeds the 4e7 cap; raise --voxel");

  TsdfVolume volume(lo, voxel, dims, margin);
  for (const DepthFrame& f : frames) volume.integrate(f);
  const TriangleMesh mesh = clean_mesh(volume.extract_mesh(), min_component, outlier_sigma);
  io::write_mesh_ply(out, mesh);
  log.note("vertices", mesh.vertices.size());
  log.note("faces", mesh.faces.size());
  std::cout << "fuse: wrote " << out << "\n";
}

// ----------------------------------------------------------------------------
// align-init

void run_align_init(const io::SessionManifest& manifest, const std::string& out) {
  RunLog log(out_dir_of(out));
  log.note("subcommand", "align-init");
  const io::Session session = io::load_session(manifest);
  io::NamedOffsets offsets;
  for (size_t v = 0; v < session.trajectories.size(); ++v) {
    if (session.registered[v].size() < 2)
      throw TooFewRegistrations("view " + session.view_ids[v] +
                                " has fewer than 2 registered frames");
    const SimilarityTransform t =
        initialize_offset(session.trajectories[v], session.registered[v]);
    ViewOffset o;
    o.yaw = std::atan2(t.rotation(1, 0), t.rotation(0, 0));
    o.translation = t.translation;
    offsets.push_back({session.view_ids[v], o});
    log.note(session.view_ids[v] + ".yaw", o.yaw);
  }
  io::write_offsets(out, offsets);
  std::cout << "align-init: wrote " << out << "\n";
}

// ----------------------------------------------------------------------------
// calibrate

void run_calibrate(const io::SessionManifest& manifest, const std::string& init_path,
                   const std::string& out, const std::string& single_view,
                   bool check_gradient) {
  RunLog log(out_dir_of(out));
  log.note("subcommand", "calibrate");
  const io::Session session = io::load_session(manifest);

  io::NamedOffsets init;
  if (!init_path.empty()) {
    init = load_named_offsets(init_path, session);
  } else {
    // No --init: bootstrap from the registered poses.
    for (size_t v = 0; v < session.trajectories.size(); ++v) {
      const SimilarityTransform t =
          initialize_offset(session.trajectories[v], session.registered[v]);
      ViewOffset o;
      o.yaw = std::atan2(t.rotation(1, 0), t.rotation(0, 0));
      o.translation = t.translation;
      init.push_back({session.view_ids[v], o});
    }
    log.note("init", "registered poses (no --init given)");
  }

  OptimizerConfig config;
  config.adam = manifest.config.calib_adam;
  config.weights = manifest.config.loss_weights;
  config.check_gradient = check_gradient;
  echo_adam(log, "adam", config.adam);
  log.note("weights.track", config.weights.track);
  log.note("weights.chamfer", config.weights.chamfer);
  log.note("weights.ba", config.weights.ba);

  CalibrationInput input;
  OffsetParams init_params;
  std::vector<std::string> solved_ids;
  if (!single_view.empty()) {
    const int v = find_view(session, single_view);
    ViewCalibrationInput view;
    view.trajectory = session.trajectories[v];
    view.cloud = session.clouds[v];
    view.landmarks = session.landmark_obs[v];
    input.views.push_back(std::move(view));
    init_params.views.push_back(init[v].second);
    solved_ids.push_back(session.view_ids[v]);
    log.note("single_view", single_view);
  } else {
    for (size_t v = 0; v < session.trajectories.size(); ++v) {
      ViewCalibrationInput view;
      view.trajectory = session.trajectories[v];
      view.cloud = session.clouds[v];
      view.landmarks = session.landmark_obs[v];
      input.views.push_back(std::move(view));
      init_params.views.push_back(init[v].second);
      solved_ids.push_back(session.view_ids[v]);
    }
    input.tracks = session.tracks;
  }
  input.landmark_points = session.landmark_points;
  input.global_cloud = session.global_cloud;

  const CalibrationResult result = calibrate(input, init_params, config);
  io::NamedOffsets out_offsets;
  for (size_t v = 0; v < solved_ids.size(); ++v)
    out_offsets.push_back({solved_ids[v], result.params.views[v]});
  io::write_offsets(out, out_offsets);
  write_history(io::join_path(out_dir_of(out), "calibrate_loss.json"),
                result.loss_history);
  log.note("loss_curve", "calibrate_loss.json");
  log.note("iterations", result.iterations);
  log.note("best_loss", result.best_loss);
  if (result.gradient_check_error >= 0.0)
    log.note("gradient_check_error", result.gradient_check_error);
  std::cout << "calibrate: best loss " << result.best_loss << ", wrote " << out << "\n";
}

// ----------------------------------------------------------------------------
// triangulate

void run_triangulate(const io::SessionManifest& manifest, const std::string& offsets_path,
                     const std::string& out) {
  RunLog log(out_dir_of(out));
  log.note("subcommand", "triangulate");
  const io::Session session = io::load_session(manifest);
  const io::NamedOffsets offsets = load_named_offsets(offsets_path, session);
  const std::vector<Trajectory> trajs = scene_frame_trajectories(session, offsets);
  const auto k3d = triangulate_sequence(session.keypoints, trajs,
                                        manifest.config.triangulation);
  size_t valid = 0, total = 0;
  for (const auto& frame : k3d)
    for (const auto& joint : frame.joints) {
      ++total;
      if (joint.valid()) ++valid;
    }
  io::write_keypoints3d(out, k3d);
  log.note("confidence_gate", manifest.config.triangulation.confidence_gate);
  log.note("min_angle_deg", manifest.config.triangulation.min_angle_deg);
  log.note("valid_joints", valid);
  log.note("total_joints", total);
  std::cout << "triangulate: " << valid << "/" << total << " joints, wrote " << out
            << "\n";
}

// ----------------------------------------------------------------------------
// fit

SkeletonParams default_fit_init(const SkeletonModel& model,
                                const std::vector<Keypoint3DFrame>& k3d) {
  SkeletonParams init = SkeletonParams::rest(model, static_cast<int>(k3d.size()));
  Vec3 last_root(0, 0, 0.9);
  for (size_t t = 0; t < k3d.size(); ++t) {
    if (!k3d[t].joints.empty() && k3d[t].joints[0].valid())
      last_root = k3d[t].joints[0].position;
    init.frames[t].root_translation = last_root;
  }
  return init;
}

void run_fit(const io::SessionManifest& manifest, const std::string& offsets_path,
             const std::string& k3d_path, const std::string& init_path,
             const std::string& out, bool check_gradient) {
  RunLog log(out_dir_of(out));
  log.note("subcommand", "fit");
  const io::Session session = io::load_session(manifest);
  const io::NamedOffsets offsets = load_named_offsets(offsets_path, session);
  const std::vector<Trajectory> trajs = scene_frame_trajectories(session, offsets);
  const auto k3d = io::read_keypoints3d(k3d_path);

  const SkeletonModel model = SkeletonModel::default_human();
  const SkeletonParams init = init_path.empty()
                                  ? default_fit_init(model, k3d)
                                  : io::read_skeleton_params(init_path);

  FitConfig config;
  config.weights = manifest.config.fit_weights;
  config.stage1 = manifest.config.fit_stage1;
  config.stage2 = manifest.config.fit_stage2;
  config.check_gradient = check_gradient;
  echo_adam(log, "stage1", config.stage1);
  echo_adam(log, "stage2", config.stage2);
  log.note("weights.kp3d", config.weights.kp3d);
  log.note("weights.smooth", config.weights.smooth);
  log.note("weights.prior", config.weights.prior);
  log.note("weights.reproj", config.weights.reproj);

  const FitResult result = fit_motion(model, k3d, session.keypoints, trajs, init, config);
  io::write_skeleton_params(out, result.params);
  write_history(io::join_path(out_dir_of(out), "fit_stage1_loss.json"),
                result.stage1_history);
  write_history(io::join_path(out_dir_of(out), "fit_stage2_loss.json"),
                result.stage2_history);
  log.note("loss_curves", "fit_stage1_loss.json fit_stage2_loss.json");
  log.note("initial_loss", result.initial_loss);
  log.note("final_loss", result.final_loss);
  std::cout << "fit: loss " << result.initial_loss << " -> " << result.final_loss
            << ", wrote " << out << "\n";
}

// ----------------------------------------------------------------------------
// contact-align

void run_contact_align(const io::SessionManifest& manifest,
                       const std::string& offsets_path, const std::string& params_path,
                       const std::string& out_dir) {
  RunLog log(out_dir);
  log.note("subcommand", "contact-align");
  const io::Session session = io::load_session(manifest);
  const io::NamedOffsets offsets = load_named_offsets(offsets_path, session);
  const std::vector<Trajectory> trajs = scene_frame_trajectories(session, offsets);
  const SkeletonParams params = io::read_skeleton_params(params_path);
  if (manifest.contacts.empty()) throw InvalidArgument("manifest has no contacts file");
  const ContactAnnotation contacts =
      io::read_contacts(io::join_path(manifest.base_dir, manifest.contacts));

  const SkeletonModel model = SkeletonModel::default_human();
  echo_adam(log, "contact", manifest.config.contact_adam);
  const ContactAlignResult result =
      contact_align(model, params, trajs, contacts, manifest.config.contact_adam);

  io::write_skeleton_params(io::join_path(out_dir, "params.json"), result.params);
  for (size_t v = 0; v < result.trajectories.size(); ++v)
    io::write_trajectory(
        io::join_path(out_dir, session.view_ids[v] + "_trajectory.json"),
        result.trajectories[v]);
  ViewOffset transform;
  transform.yaw = result.yaw;
  transform.translation = result.translation;
  io::write_offsets(io::join_path(out_dir, "transform.json"), {{"contact", transform}});
  log.note("yaw", result.yaw);
  log.note("translation", result.translation.transpose());
  std::cout << "contact-align: yaw " << result.yaw << ", wrote " << out_dir << "\n";
}

// ----------------------------------------------------------------------------
// stitch

void run_stitch(const std::vector<std::string>& chunk_paths,
                const std::vector<std::string>& cloud_paths, int overlap,
                bool with_scale, const std::string& out) {
  RunLog log(out_dir_of(out));
  log.note("subcommand", "stitch");
  log.note("overlap", overlap);
  if (chunk_paths.size() < 2) throw InvalidArgument("need at least two chunks");
  if (!cloud_paths.empty() && cloud_paths.size() != chunk_paths.size())
    throw InvalidArgument("one cloud per chunk when clouds are given");
  std::vector<TrajectoryChunk> chunks;
  for (size_t i = 0; i < chunk_paths.size(); ++i) {
    TrajectoryChunk chunk;
    chunk.trajectory = io::read_trajectory(chunk_paths[i]);
    if (!cloud_paths.empty())
      chunk.cloud = io::read_point_cloud_ply(cloud_paths[i]);
    chunks.push_back(std::move(chunk));
  }
  const ChunkAlignment alignment = stitch_chunks(
      chunks, std::vector<int>(chunks.size() - 1, overlap), with_scale);
  io::write_chunk_alignment(out, alignment);
  log.note("chunks", chunks.size());
  std::cout << "stitch: aligned " << chunks.size() << " chunks, wrote " << out << "\n";
}

// ----------------------------------------------------------------------------
// metrics

void run_metrics(const io::SessionManifest& manifest, const std::string& offsets_path,
                 const std::string& params_path, const std::string& pred_path,
                 const std::string& gt_path, const std::string& out, int chunk) {
  RunLog log(out_dir_of(out));
  log.note("subcommand", "metrics");
  const io::Session session = io::load_session(manifest);

  JointSequence gt;
  if (!gt_path.empty())
    gt = io::read_joint_sequence(gt_path);
  else if (!manifest.gt_joints.empty())
    gt = io::read_joint_sequence(io::join_path(manifest.base_dir, manifest.gt_joints));
  else
    throw InvalidArgument("no ground-truth joints (manifest gt_joints or --gt)");

  const SkeletonModel model = SkeletonModel::default_human();
  JointSequence pred;
  if (!pred_path.empty()) {
    pred = io::read_joint_sequence(pred_path);
  } else if (!params_path.empty()) {
    const SkeletonParams params = io::read_skeleton_params(params_path);
    pred.fps = gt.fps;
    for (const FramePose& f : params.frames)
      pred.frames.push_back(forward_kinematics(model, params.shape, f).positions);
  } else {
    throw InvalidArgument("need --params or --pred");
  }
  const size_t frames = std::min(pred.frame_count(), gt.frame_count());
  pred.frames.resize(frames);
  gt.frames.resize(frames);

  pred.validate();
  gt.validate();
  if (pred.joint_count() == 0)
    throw InvalidArgument("prediction has no joints");

  std::vector<std::pair<std::string, double>> report;
  report.push_back({"wa_mpjpe_mm", wa_mpjpe_mm(pred, gt, chunk)});
  report.push_back({"w_mpjpe_mm", w_mpjpe_mm(pred, gt, chunk)});
  std::vector<Vec3> pred_root, gt_root;
  for (size_t t = 0; t < frames; ++t) {
    pred_root.push_back(pred.frames[t][0]);
    gt_root.push_back(gt.frames[t][0]);
  }
  report.push_back({"rte_percent", rte_percent(pred_root, gt_root)});
  if (pred.joint_count() == static_cast<size_t>(model.joint_count())) {
    bool no_contact = false;
    report.push_back({"jitter", jitter(pred, model.foot_joints(),
                                       manifest.config.jitter_contact_height,
                                       &no_contact)});
    if (no_contact) log.note("jitter", "no contact frames found");
  } else {
    log.note("jitter", "skipped: prediction joint count differs from the skeleton");
  }

  if (!offsets_path.empty() && !session.keypoints.empty()) {
    const io::NamedOffsets offsets = load_named_offsets(offsets_path, session);
    std::vector<Trajectory> trajs = scene_frame_trajectories(session, offsets);
    std::vector<std::vector<Keypoint2DFrame>> k2d = session.keypoints;
    for (auto& stream : k2d) stream.resize(frames);
    for (auto& t : trajs) t.frames.resize(frames);
    report.push_back({"reproj_error_px", reproj_error_px(pred, k2d, trajs)});
    if (!manifest.depth_samples.empty()) {
      std::vector<DepthSample> samples = io::read_depth_samples(
          io::join_path(manifest.base_dir, manifest.depth_samples));
      std::vector<DepthSample> usable;
      for (const DepthSample& s : samples)
        if (s.frame < static_cast<int>(frames)) usable.push_back(s);
      if (!usable.empty())
        report.push_back({"depth_mse_proxy_m2", depth_mse_proxy(pred, trajs, usable)});
    }
  }

  io::write_report(out, report);
  for (const auto& [name, value] : report) log.note(name, value);
  std::cout << "metrics:";
  for (const auto& [name, value] : report) std::cout << " " << name << "=" << value;
  std::cout << "\nwrote " << out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"world-frame dual-view capture calibration and reconstruction"};
  app.require_subcommand(1);

  // synth ---------------------------------------------------------------
  SynthArgs synth_args;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic session");
  synth_cmd->add_option("--seed", synth_args.seed, "generator seed");
  synth_cmd->add_option("--out", synth_args.out, "output directory")->required();
  synth_cmd->add_option("--frames", synth_args.frames, "motion frame count");
  synth_cmd->add_option("--scene", synth_args.scene_class, "indoor|outdoor");
  synth_cmd->add_option("--preset", synth_args.preset, "default|ambiguity");
  synth_cmd->add_option("--motion", synth_args.motion, "walk|sit");
  synth_cmd->add_option("--baseline-deg", synth_args.baseline_deg,
                        "camera baseline angle (60-120 recommended)");
  synth_cmd->add_option("--orbit-amplitude", synth_args.orbit_amplitude,
                        "camera azimuth sway, radians");
  synth_cmd->add_option("--scan-keyframes", synth_args.scan_keyframes,
                        "depth keyframes for fusion");
  synth_cmd->add_option("--depth-format", synth_args.depth_format, "pgm|f32");
  synth_cmd->add_option("--frame-offset", synth_args.frame_offset,
                        "pad view 2 with this many lead frames");
  synth_cmd->add_option("--chunked", synth_args.chunked, "emit N trajectory chunks");
  synth_cmd->add_option("--chunk-overlap", synth_args.chunk_overlap,
                        "frames shared by adjacent chunks");
  synth_cmd->add_option("--noise-seed", synth_args.noise_seed, "perturbation seed");
  synth_cmd->add_option("--noise-kp", synth_args.noise_kp, "keypoint/track pixel sigma");
  synth_cmd->add_option("--noise-landmark", synth_args.noise_landmark,
                        "landmark pixel sigma");
  synth_cmd->add_option("--noise-depth", synth_args.noise_depth, "relative depth sigma");
  synth_cmd->add_option("--noise-traj-m", synth_args.noise_traj_m,
                        "trajectory translation sigma, meters");
  synth_cmd->add_option("--noise-traj-rad", synth_args.noise_traj_rad,
                        "trajectory rotation sigma, radians");
  synth_cmd->add_option("--dropout", synth_args.dropout, "confidence dropout rate");
  synth_cmd->add_option("--noise-cloud", synth_args.noise_cloud, "cloud sigma, meters");

  // shared manifest option helper ----------------------------------------
  std::string manifest_path, out_path, init_path, offsets_path, k3d_path, params_path;
  std::string pred_path, gt_path, single_view;
  bool check_gradient = false;

  CLI::App* fuse_cmd = app.add_subcommand("fuse", "fuse depth frames into a mesh");
  double voxel = -1, trunc_factor = -1, min_component = -1, outlier_sigma = -1;
  fuse_cmd->add_option("--manifest", manifest_path, "session manifest JSON")->required();
  fuse_cmd->add_option("--out", out_path, "output PLY mesh")->required();
  fuse_cmd->add_option("--voxel", voxel, "voxel size, meters");
  fuse_cmd->add_option("--trunc-factor", trunc_factor, "truncation margin in voxels");
  fuse_cmd->add_option("--min-component", min_component,
                       "drop components below this fraction of the largest");
  fuse_cmd->add_option("--outlier-sigma", outlier_sigma, "vertex outlier threshold");

  CLI::App* align_cmd =
      app.add_subcommand("align-init", "offsets from registered poses");
  align_cmd->add_option("--manifest", manifest_path, "session manifest JSON")->required();
  align_cmd->add_option("--out", out_path, "output offsets JSON")->required();

  CLI::App* calib_cmd = app.add_subcommand("calibrate", "refine per-view offsets");
  double lr = -1, clip = -1, tol = -1, w_track = -1, w_chamfer = -1, w_ba = -1;
  int iters = -1;
  calib_cmd->add_option("--manifest", manifest_path, "session manifest JSON")->required();
  calib_cmd->add_option("--init", init_path, "initial offsets JSON");
  calib_cmd->add_option("--out", out_path, "output offsets JSON")->required();
  calib_cmd->add_option("--single-view", single_view,
                        "calibrate one view only (drops the track term)");
  calib_cmd->add_option("--lr", lr, "Adam learning rate");
  calib_cmd->add_option("--iters", iters, "max iterations");
  calib_cmd->add_option("--clip", clip, "gradient clip norm");
  calib_cmd->add_option("--tol", tol, "relative convergence tolerance");
  calib_cmd->add_option("--w-track", w_track, "track loss weight");
  calib_cmd->add_option("--w-chamfer", w_chamfer, "chamfer loss weight");
  calib_cmd->add_option("--w-ba", w_ba, "landmark reprojection weight");
  calib_cmd->add_flag("--check-gradient", check_gradient,
                      "finite-difference check at the initial iterate");

  CLI::App* tri_cmd = app.add_subcommand("triangulate", "triangulate 2D keypoints");
  double conf_gate = -1, min_angle = -1;
  tri_cmd->add_option("--manifest", manifest_path, "session manifest JSON")->required();
  tri_cmd->add_option("--offsets", offsets_path, "calibrated offsets JSON")->required();
  tri_cmd->add_option("--out", out_path, "output 3D keypoints JSON")->required();
  tri_cmd->add_option("--confidence-gate", conf_gate, "minimum per-view confidence");
  tri_cmd->add_option("--min-angle-deg", min_angle, "smallest usable ray angle");

  CLI::App* fit_cmd = app.add_subcommand("fit", "fit the skeleton in world space");
  fit_cmd->add_option("--manifest", manifest_path, "session manifest JSON")->required();
  fit_cmd->add_option("--offsets", offsets_path, "calibrated offsets JSON")->required();
  fit_cmd->add_option("--k3d", k3d_path, "triangulated joints JSON")->required();
  fit_cmd->add_option("--init", init_path, "initial skeleton params JSON");
  fit_cmd->add_option("--out", out_path, "output skeleton params JSON")->required();
  fit_cmd->add_flag("--check-gradient", check_gradient,
               "finite-difference check at the initial iterate");

  CLI::App* contact_cmd =
      app.add_subcommand("contact-align", "marker-based rigid post-alignment");
  contact_cmd->add_option("--manifest", manifest_path, "session manifest JSON")->required();
  contact_cmd->add_option("--offsets", offsets_path, "calibrated offsets JSON")->required();
  contact_cmd->add_option("--params", params_path, "fitted skeleton params JSON")->required();
  contact_cmd->add_option("--out-dir", out_path, "output directory")->required();

  CLI::App* stitch_cmd = app.add_subcommand("stitch", "chain chunked trajectories");
  std::vector<std::string> chunk_paths, cloud_paths;
  int overlap = 8;
  bool no_scale = false;
  stitch_cmd->add_option("--chunks", chunk_paths, "chunk trajectory files")
      ->required()
      ->delimiter(',');
  stitch_cmd->add_option("--clouds", cloud_paths, "optional per-chunk clouds")
      ->delimiter(',');
  stitch_cmd->add_option("--overlap", overlap, "overlapping frames per pair");
  stitch_cmd->add_flag("--no-scale", no_scale, "rigid-only chunk alignment");
  stitch_cmd->add_option("--out", out_path, "output alignment JSON")->required();

  CLI::App* metrics_cmd = app.add_subcommand("metrics", "world-space evaluation");
  int chunk = -1;
  metrics_cmd->add_option("--manifest", manifest_path, "session manifest JSON")->required();
  metrics_cmd->add_option("--offsets", offsets_path, "for reprojection metrics");
  metrics_cmd->add_option("--params", params_path, "fitted skeleton params");
  metrics_cmd->add_option("--pred", pred_path, "predicted joints JSON");
  metrics_cmd->add_option("--gt", gt_path, "ground-truth joints JSON");
  metrics_cmd->add_option("--out", out_path, "output report JSON")->required();
  metrics_cmd->add_option("--chunk", chunk, "chunk length in frames");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (synth_cmd->parsed()) {
      run_synth(synth_args);
      return 0;
    }
    if (stitch_cmd->parsed()) {
      run_stitch(chunk_paths, cloud_paths, overlap, !no_scale, out_path);
      return 0;
    }

    io::SessionManifest manifest = io::read_manifest(manifest_path);

    if (fuse_cmd->parsed()) {
      if (voxel > 0) manifest.config.fusion_voxel = voxel;
      if (trunc_factor > 0) manifest.config.fusion_truncation_factor = trunc_factor;
      if (min_component >= 0) manifest.config.clean_min_component_fraction = min_component;
      if (outlier_sigma > 0) manifest.config.clean_outlier_sigma = outlier_sigma;
      run_fuse(manifest, out_path, manifest.config.fusion_voxel,
               manifest.config.fusion_truncation_factor,
               manifest.config.clean_min_component_fraction,
               manifest.config.clean_outlier_sigma);
    } else if (align_cmd->parsed()) {
      run_align_init(manifest, out_path);
    } else if (calib_cmd->parsed()) {
      if (lr > 0) manifest.config.calib_adam.learning_rate = lr;
      if (iters > 0) manifest.config.calib_adam.max_iterations = iters;
      if (clip > 0) manifest.config.calib_adam.clip_norm = clip;
      if (tol >= 0) manifest.config.calib_adam.tolerance = tol;
      if (w_track >= 0) manifest.config.loss_weights.track = w_track;
      if (w_chamfer >= 0) manifest.config.loss_weights.chamfer = w_chamfer;
      if (w_ba >= 0) manifest.config.loss_weights.ba = w_ba;
      run_calibrate(manifest, init_path, out_path, single_view, check_gradient);
    } else if (tri_cmd->parsed()) {
      if (conf_gate >= 0) manifest.config.triangulation.confidence_gate = conf_gate;
      if (min_angle >= 0) manifest.config.triangulation.min_angle_deg = min_angle;
      run_triangulate(manifest, offsets_path, out_path);
    } else if (fit_cmd->parsed()) {
      run_fit(manifest, offsets_path, k3d_path, init_path, out_path, check_gradient);
    } else if (contact_cmd->parsed()) {
      run_contact_align(manifest, offsets_path, params_path, out_path);
    } else if (metrics_cmd->parsed()) {
      if (chunk > 0) manifest.config.metrics_chunk = chunk;
      run_metrics(manifest, offsets_path, params_path, pred_path, gt_path, out_path,
                  manifest.config.metrics_chunk);
    }
    return 0;
  } catch (const IoError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
