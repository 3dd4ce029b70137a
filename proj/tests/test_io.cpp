#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "support/test_rand.hpp"
#include "wfm/io.hpp"
#include "wfm/synth.hpp"

using namespace wfm;
using namespace wfm::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("wfm_io_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& leaf) const { return (path / leaf).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

synth::Bundle small_bundle(uint64_t seed) {
  synth::BundleSpec spec;
  spec.motion.frame_count = 6;
  spec.track_points_per_frame = 3;
  spec.landmark_count = 8;
  spec.global_cloud_points = 40;
  spec.scan_keyframes = 2;
  spec.depth_width = 24;
  spec.depth_height = 32;
  return synth::generate(seed, spec);
}

}  // namespace

TEST_CASE("trajectory json round-trips byte-identically") {
  TempDir dir;
  const synth::Bundle b = small_bundle(301);
  const std::string p1 = dir.file("traj.json"), p2 = dir.file("traj2.json");
  io::write_trajectory(p1, b.views[0].trajectory_view);
  const Trajectory read = io::read_trajectory(p1);
  io::write_trajectory(p2, read);
  CHECK(slurp(p1) == slurp(p2));
  CHECK(read.view_id == b.views[0].trajectory_view.view_id);
  REQUIRE(read.size() == b.views[0].trajectory_view.size());
  for (size_t t = 0; t < read.size(); ++t) {
    CHECK((read.frames[t].pose.rotation -
           b.views[0].trajectory_view.frames[t].pose.rotation)
              .norm() < 1e-12);
    CHECK((read.frames[t].pose.translation -
           b.views[0].trajectory_view.frames[t].pose.translation)
              .norm() < 1e-12);
  }
}

TEST_CASE("registered, keypoints, tracks, landmarks, offsets round-trip") {
  TempDir dir;
  const synth::Bundle b = small_bundle(302);

  const std::string reg = dir.file("reg.json");
  io::write_registered(reg, b.views[0].registered);
  const auto reg_read = io::read_registered(reg);
  io::write_registered(dir.file("reg2.json"), reg_read);
  CHECK(slurp(reg) == slurp(dir.file("reg2.json")));

  const std::string kp = dir.file("kp.json");
  io::write_keypoints(kp, b.views[1].keypoints);
  const auto kp_read = io::read_keypoints(kp);
  io::write_keypoints(dir.file("kp2.json"), kp_read);
  CHECK(slurp(kp) == slurp(dir.file("kp2.json")));

  const std::string tr = dir.file("tracks.json");
  io::write_tracks(tr, b.tracks);
  io::write_tracks(dir.file("tracks2.json"), io::read_tracks(tr));
  CHECK(slurp(tr) == slurp(dir.file("tracks2.json")));

  io::LandmarkData data;
  data.points = b.landmark_points;
  data.observations["v1"] = b.views[0].landmark_obs;
  data.observations["v2"] = b.views[1].landmark_obs;
  const std::string lm = dir.file("landmarks.json");
  io::write_landmarks(lm, data);
  io::write_landmarks(dir.file("landmarks2.json"), io::read_landmarks(lm));
  CHECK(slurp(lm) == slurp(dir.file("landmarks2.json")));

  io::NamedOffsets offsets = {{"v1", b.true_offsets[0]}, {"v2", b.true_offsets[1]}};
  const std::string off = dir.file("offsets.json");
  io::write_offsets(off, offsets);
  const io::NamedOffsets off_read = io::read_offsets(off);
  io::write_offsets(dir.file("offsets2.json"), off_read);
  CHECK(slurp(off) == slurp(dir.file("offsets2.json")));
  CHECK(off_read[0].second.yaw == b.true_offsets[0].yaw);
}

TEST_CASE("ply cloud and mesh round-trip") {
  TempDir dir;
  const synth::Bundle b = small_bundle(303);
  PointCloud cloud = b.global_cloud;
  cloud.confidence.assign(cloud.size(), 0.5);
  const std::string ply = dir.file("cloud.ply");
  io::write_point_cloud_ply(ply, cloud);
  const PointCloud read = io::read_point_cloud_ply(ply);
  io::write_point_cloud_ply(dir.file("cloud2.ply"), read);
  CHECK(slurp(ply) == slurp(dir.file("cloud2.ply")));
  REQUIRE(read.size() == cloud.size());
  for (size_t i = 0; i < read.size(); ++i)
    CHECK((read.points[i] - cloud.points[i]).norm() == 0.0);

  TriangleMesh mesh;
  mesh.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  mesh.faces = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  const std::string mply = dir.file("mesh.ply");
  io::write_mesh_ply(mply, mesh);
  const TriangleMesh mesh_read = io::read_mesh_ply(mply);
  io::write_mesh_ply(dir.file("mesh2.ply"), mesh_read);
  CHECK(slurp(mply) == slurp(dir.file("mesh2.ply")));
  CHECK(mesh_read.faces == mesh.faces);
}

TEST_CASE("depth directories round-trip in both formats") {
  TempDir dir;
  const synth::Bundle b = small_bundle(304);
  REQUIRE(!b.scan.empty());

  SUBCASE("float32") {
    io::write_depth_dir(dir.file("scan_f32"), b.scan, io::DepthFormat::kFloat32);
    const auto read = io::read_depth_dir(dir.file("scan_f32"));
    REQUIRE(read.size() == b.scan.size());
    for (size_t i = 0; i < read.size(); ++i) {
      CHECK(read[i].depth == b.scan[i].depth);  // bit-exact floats
      CHECK((read[i].pose.rotation - b.scan[i].pose.rotation).norm() < 1e-12);
    }
    // Idempotent re-write.
    io::write_depth_dir(dir.file("scan_f32b"), read, io::DepthFormat::kFloat32);
    CHECK(slurp(dir.file("scan_f32/000000.f32d")) ==
          slurp(dir.file("scan_f32b/000000.f32d")));
  }

  SUBCASE("pgm millimeters quantizes once then stabilizes") {
    io::write_depth_dir(dir.file("scan_pgm"), b.scan, io::DepthFormat::kPgmMillimeters);
    const auto read = io::read_depth_dir(dir.file("scan_pgm"));
    REQUIRE(read.size() == b.scan.size());
    for (size_t i = 0; i < read.size(); ++i)
      for (size_t px = 0; px < read[i].depth.size(); ++px)
        CHECK(std::abs(read[i].depth[px] - b.scan[i].depth[px]) <= 5.01e-4);
    io::write_depth_dir(dir.file("scan_pgm2"), read, io::DepthFormat::kPgmMillimeters);
    CHECK(slurp(dir.file("scan_pgm/000000.pgm")) ==
          slurp(dir.file("scan_pgm2/000000.pgm")));
  }
}

TEST_CASE("skeleton params, keypoints3d, joints, contacts, chunk alignment round-trip") {
  TempDir dir;
  const synth::Bundle b = small_bundle(305);

  const std::string sp = dir.file("params.json");
  io::write_skeleton_params(sp, b.gt_params);
  io::write_skeleton_params(dir.file("params2.json"), io::read_skeleton_params(sp));
  CHECK(slurp(sp) == slurp(dir.file("params2.json")));

  const auto k3d = triangulate_sequence(
      {b.views[0].keypoints, b.views[1].keypoints},
      {b.views[0].trajectory_scene, b.views[1].trajectory_scene});
  const std::string kp3 = dir.file("k3d.json");
  io::write_keypoints3d(kp3, k3d);
  io::write_keypoints3d(dir.file("k3d2.json"), io::read_keypoints3d(kp3));
  CHECK(slurp(kp3) == slurp(dir.file("k3d2.json")));

  const std::string js = dir.file("joints.json");
  io::write_joint_sequence(js, synth::gt_joint_sequence(b));
  io::write_joint_sequence(dir.file("joints2.json"), io::read_joint_sequence(js));
  CHECK(slurp(js) == slurp(dir.file("joints2.json")));

  const std::string ct = dir.file("contacts.json");
  io::write_contacts(ct, b.contacts);
  io::write_contacts(dir.file("contacts2.json"), io::read_contacts(ct));
  CHECK(slurp(ct) == slurp(dir.file("contacts2.json")));

  ChunkAlignment alignment;
  Rng rng(307);
  alignment.per_chunk = {SimilarityTransform::identity(), random_similarity(rng)};
  alignment.cumulative = {SimilarityTransform::identity(),
                          alignment.per_chunk[1]};
  const std::string ca = dir.file("chunks.json");
  io::write_chunk_alignment(ca, alignment);
  io::write_chunk_alignment(dir.file("chunks2.json"), io::read_chunk_alignment(ca));
  CHECK(slurp(ca) == slurp(dir.file("chunks2.json")));

  const std::string ds = dir.file("depth_samples.json");
  io::write_depth_samples(ds, b.depth_samples);
  io::write_depth_samples(dir.file("depth_samples2.json"), io::read_depth_samples(ds));
  CHECK(slurp(ds) == slurp(dir.file("depth_samples2.json")));

  const std::string rp = dir.file("report.json");
  io::write_report(rp, {{"wa_mpjpe_mm", 12.5}, {"rte_percent", 0.7}});
  const auto report = io::read_report(rp);
  io::write_report(dir.file("report2.json"), report);
  CHECK(slurp(rp) == slurp(dir.file("report2.json")));
  CHECK(report[0].first == "wa_mpjpe_mm");
}

TEST_CASE("manifest round-trip and frame-offset slicing") {
  TempDir dir;
  const synth::Bundle b = small_bundle(306);

  // View 2 gets two junk lead-in frames the offset must drop.
  Trajectory padded = b.views[1].trajectory_view;
  std::vector<Keypoint2DFrame> padded_kp = b.views[1].keypoints;
  TrajectoryFrame junk;
  junk.pose = Pose::identity();
  for (int i = 0; i < 2; ++i) {
    junk.timestamp = -1.0 - i;
    padded.frames.insert(padded.frames.begin(), junk);
    padded_kp.insert(padded_kp.begin(), padded_kp.front());
  }
  for (size_t i = 0; i < padded.frames.size(); ++i)
    padded.frames[i].timestamp = static_cast<double>(i);

  io::write_trajectory(dir.file("t1.json"), b.views[0].trajectory_view);
  io::write_trajectory(dir.file("t2.json"), padded);
  io::write_keypoints(dir.file("k1.json"), b.views[0].keypoints);
  io::write_keypoints(dir.file("k2.json"), padded_kp);
  io::write_point_cloud_ply(dir.file("c1.ply"), b.views[0].cloud_view);
  io::write_point_cloud_ply(dir.file("c2.ply"), b.views[1].cloud_view);
  io::write_point_cloud_ply(dir.file("global.ply"), b.global_cloud);
  io::write_tracks(dir.file("tracks.json"), b.tracks);
  io::LandmarkData data;
  data.points = b.landmark_points;
  data.observations["v1"] = b.views[0].landmark_obs;
  data.observations["v2"] = b.views[1].landmark_obs;
  io::write_landmarks(dir.file("landmarks.json"), data);
  io::write_registered(dir.file("r1.json"), b.views[0].registered);
  io::write_registered(dir.file("r2.json"), b.views[1].registered);

  io::SessionManifest manifest;
  manifest.views = {{"v1", "t1.json", "k1.json", "c1.ply", "r1.json"},
                    {"v2", "t2.json", "k2.json", "c2.ply", "r2.json"}};
  manifest.tracks = "tracks.json";
  manifest.landmarks = "landmarks.json";
  manifest.global_cloud = "global.ply";
  manifest.frame_offset = 2;
  const std::string mpath = dir.file("manifest.json");
  io::write_manifest(mpath, manifest);
  const io::SessionManifest read = io::read_manifest(mpath);
  CHECK(read.frame_offset == 2);
  CHECK(read.views.size() == 2);
  CHECK(read.config.metrics_chunk == 100);

  const io::Session session = io::load_session(read);
  REQUIRE(session.trajectories.size() == 2);
  CHECK(session.trajectories[0].size() == b.views[0].trajectory_view.size());
  CHECK(session.trajectories[1].size() == session.trajectories[0].size());
  // The junk frames are gone: frame 0 of view 2 equals the unpadded original.
  CHECK((session.trajectories[1].frames[0].pose.translation -
         b.views[1].trajectory_view.frames[0].pose.translation)
            .norm() < 1e-12);
  CHECK(session.keypoints[1].size() == session.keypoints[0].size());
  CHECK(session.tracks.size() == b.tracks.size());
}

TEST_CASE("parse errors carry the input-format family") {
  TempDir dir;
  const std::string bad = dir.file("bad.json");
  std::ofstream(bad) << "{ not json";
  CHECK_THROWS_AS(io::read_trajectory(bad), ParseError);
  CHECK_THROWS_AS(io::read_trajectory(dir.file("missing.json")), IoError);

  std::ofstream(dir.file("short.ply")) << "ply\nformat ascii 1.0\nelement vertex 5\n"
                                          "property double x\nproperty double y\n"
                                          "property double z\nend_header\n1 2 3\n";
  CHECK_THROWS_AS(io::read_point_cloud_ply(dir.file("short.ply")), ParseError);

  std::ofstream(dir.file("bad.pgm")) << "P2\n2 2\n255\n";
  io::SessionManifest m;
  CHECK_THROWS_AS(io::read_manifest(dir.file("missing_manifest.json")), IoError);
}
