#include "wfm/io.hpp"

#include <json.hpp>

#include <array>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace wfm::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

json parse(const std::string& path) {
  try {
    return json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// Returns a reference into the parent document, which outlives every use.
const json& require(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) throw ParseError(path + ": missing key '" + key + "'");
  return j.at(key);
}

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Serialized quaternions must survive write -> read -> write byte-identically,
// but matrix<->quaternion conversion plus decimal rounding drifts by about the
// rounding grid each cycle (the norm projection moves points as far as the
// snap does, at any grid size). The writer therefore iterates
// snap(quat(matrix(q))) to its limit cycle and emits the cycle's
// lexicographically smallest member, which makes rewriting a parsed file
// reproduce the exact bytes.
std::array<double, 4> snap_quat(std::array<double, 4> q) {
  for (double& c : q) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12e", c);
    c = std::strtod(buf, nullptr);
  }
  return q;
}

std::array<double, 4> canonical_sign(std::array<double, 4> q) {
  for (double c : q) {
    if (c > 0.0) break;
    if (c < 0.0) {
      for (double& v : q) v = -v;
      break;
    }
  }
  return q;
}

std::array<double, 4> quat_of_matrix(const Mat3& m) {
  const Quat q(m);
  return canonical_sign({q.w(), q.x(), q.y(), q.z()});
}

Mat3 matrix_of_quat(const std::array<double, 4>& q) {
  return Quat(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

std::array<double, 4> canonical_quat(const Mat3& m) {
  std::array<double, 4> g = snap_quat(quat_of_matrix(m));
  std::vector<std::array<double, 4>> visited = {g};
  for (int iter = 0; iter < 16; ++iter) {
    const std::array<double, 4> next = snap_quat(quat_of_matrix(matrix_of_quat(g)));
    for (size_t i = 0; i < visited.size(); ++i) {
      if (next == visited[i]) {
        // Limit cycle found; pick its smallest member deterministically.
        std::array<double, 4> best = next;
        for (size_t k = i; k < visited.size(); ++k) best = std::min(best, visited[k]);
        return best;
      }
    }
    visited.push_back(next);
    g = next;
  }
  return g;
}

json jvec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json jvec2(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec3 to_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Vec2 to_vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ParseError("expected a 2-vector");
  return {j[0].get<double>(), j[1].get<double>()};
}

json jpose(const Pose& pose) {
  const std::array<double, 4> q = canonical_quat(pose.rotation);  // wxyz
  return {{"q", json::array({q[1], q[2], q[3], q[0]})},
          {"p", jvec3(pose.translation)}};
}

Pose to_pose(const json& j, const std::string& path) {
  const json q = require(j, "q", path);
  if (!q.is_array() || q.size() != 4) throw ParseError(path + ": quaternion must be xyzw");
  const Quat quat(q[3].get<double>(), q[0].get<double>(), q[1].get<double>(),
                  q[2].get<double>());
  return Pose::from_quaternion(quat, to_vec3(require(j, "p", path)));
}

json jintrinsics(const Intrinsics& in) {
  return {{"fx", in.fx}, {"fy", in.fy}, {"cx", in.cx},
          {"cy", in.cy}, {"width", in.width}, {"height", in.height}};
}

Intrinsics to_intrinsics(const json& j, const std::string& path) {
  return Intrinsics(require(j, "fx", path).get<double>(),
                    require(j, "fy", path).get<double>(),
                    require(j, "cx", path).get<double>(),
                    require(j, "cy", path).get<double>(),
                    require(j, "width", path).get<int>(),
                    require(j, "height", path).get<int>());
}

SceneClass to_scene_class(const std::string& s, const std::string& path) {
  if (s == "indoor") return SceneClass::kIndoor;
  if (s == "outdoor") return SceneClass::kOutdoor;
  throw ParseError(path + ": scene class must be indoor or outdoor");
}

const char* scene_class_name(SceneClass c) {
  return c == SceneClass::kIndoor ? "indoor" : "outdoor";
}

void dump(const std::string& path, const json& j) { spit(path, j.dump(2) + "\n"); }

}  // namespace

void write_trajectory(const std::string& path, const Trajectory& trajectory) {
  json frames = json::array();
  for (const TrajectoryFrame& f : trajectory.frames) {
    json jf = jpose(f.pose);
    jf["t"] = f.timestamp;
    frames.push_back(jf);
  }
  dump(path, {{"view_id", trajectory.view_id},
              {"intrinsics", jintrinsics(trajectory.intrinsics)},
              {"frames", frames}});
}

Trajectory read_trajectory(const std::string& path) {
  const json j = parse(path);
  Trajectory out;
  out.view_id = require(j, "view_id", path).get<std::string>();
  out.intrinsics = to_intrinsics(require(j, "intrinsics", path), path);
  for (const json& jf : require(j, "frames", path)) {
    TrajectoryFrame f;
    f.timestamp = require(jf, "t", path).get<double>();
    f.pose = to_pose(jf, path);
    out.frames.push_back(f);
  }
  out.validate();
  return out;
}

void write_registered(const std::string& path,
                      const std::vector<std::pair<int, Pose>>& poses) {
  json frames = json::array();
  for (const auto& [frame, pose] : poses) {
    json jf = jpose(pose);
    jf["frame"] = frame;
    frames.push_back(jf);
  }
  dump(path, {{"frames", frames}});
}

std::vector<std::pair<int, Pose>> read_registered(const std::string& path) {
  const json j = parse(path);
  std::vector<std::pair<int, Pose>> out;
  for (const json& jf : require(j, "frames", path))
    out.push_back({require(jf, "frame", path).get<int>(), to_pose(jf, path)});
  return out;
}

void write_keypoints(const std::string& path, const std::vector<Keypoint2DFrame>& frames) {
  json jframes = json::array();
  for (const Keypoint2DFrame& f : frames) {
    json joints = json::array();
    for (size_t i = 0; i < f.pixels.size(); ++i)
      joints.push_back(json::array({f.pixels[i].x(), f.pixels[i].y(), f.confidences[i]}));
    jframes.push_back({{"frame", f.frame}, {"joints", joints}});
  }
  dump(path, {{"frames", jframes}});
}

std::vector<Keypoint2DFrame> read_keypoints(const std::string& path) {
  const json j = parse(path);
  std::vector<Keypoint2DFrame> out;
  for (const json& jf : require(j, "frames", path)) {
    Keypoint2DFrame f;
    f.frame = require(jf, "frame", path).get<int>();
    for (const json& joint : require(jf, "joints", path)) {
      if (!joint.is_array() || joint.size() != 3)
        throw ParseError(path + ": joint entries are [u, v, confidence]");
      f.pixels.emplace_back(joint[0].get<double>(), joint[1].get<double>());
      f.confidences.push_back(joint[2].get<double>());
    }
    out.push_back(std::move(f));
  }
  return out;
}

void write_tracks(const std::string& path,
                  const std::vector<TrackedCorrespondence>& tracks) {
  json jtracks = json::array();
  for (const TrackedCorrespondence& c : tracks) {
    jtracks.push_back({{"frame", c.frame},
                       {"v1",
                        {{"px", jvec2(c.pixel[0])},
                         {"depth", c.depth[0]},
                         {"conf", c.confidence[0]}}},
                       {"v2",
                        {{"px", jvec2(c.pixel[1])},
                         {"depth", c.depth[1]},
                         {"conf", c.confidence[1]}}}});
  }
  dump(path, {{"correspondences", jtracks}});
}

std::vector<TrackedCorrespondence> read_tracks(const std::string& path) {
  const json j = parse(path);
  std::vector<TrackedCorrespondence> out;
  for (const json& jc : require(j, "correspondences", path)) {
    TrackedCorrespondence c;
    c.frame = require(jc, "frame", path).get<int>();
    const char* keys[2] = {"v1", "v2"};
    for (int v = 0; v < 2; ++v) {
      const json jv = require(jc, keys[v], path);
      c.pixel[v] = to_vec2(require(jv, "px", path));
      c.depth[v] = require(jv, "depth", path).get<double>();
      c.confidence[v] = require(jv, "conf", path).get<double>();
    }
    out.push_back(c);
  }
  return out;
}

void write_landmarks(const std::string& path, const LandmarkData& data) {
  json points = json::array();
  for (const Vec3& p : data.points) points.push_back(jvec3(p));
  json obs = json::object();
  for (const auto& [view, list] : data.observations) {
    json jlist = json::array();
    for (const LandmarkObservation& o : list)
      jlist.push_back(
          {{"frame", o.frame}, {"landmark", o.landmark}, {"px", jvec2(o.pixel)}});
    obs[view] = jlist;
  }
  dump(path, {{"points", points}, {"observations", obs}});
}

LandmarkData read_landmarks(const std::string& path) {
  const json j = parse(path);
  LandmarkData out;
  for (const json& p : require(j, "points", path)) out.points.push_back(to_vec3(p));
  for (const auto& [view, jlist] : require(j, "observations", path).items()) {
    std::vector<LandmarkObservation> list;
    for (const json& jo : jlist) {
      LandmarkObservation o;
      o.frame = require(jo, "frame", path).get<int>();
      o.landmark = require(jo, "landmark", path).get<int>();
      o.pixel = to_vec2(require(jo, "px", path));
      list.push_back(o);
    }
    out.observations[view] = std::move(list);
  }
  return out;
}

void write_offsets(const std::string& path, const NamedOffsets& offsets) {
  json views = json::object();
  for (const auto& [view, o] : offsets)
    views[view] = {{"yaw", o.yaw}, {"translation", jvec3(o.translation)}, {"scale", 1.0}};
  dump(path, {{"views", views}});
}

NamedOffsets read_offsets(const std::string& path) {
  const json j = parse(path);
  NamedOffsets out;
  for (const auto& [view, jo] : require(j, "views", path).items()) {
    ViewOffset o;
    o.yaw = require(jo, "yaw", path).get<double>();
    o.translation = to_vec3(require(jo, "translation", path));
    out.push_back({view, o});
  }
  return out;
}

void write_point_cloud_ply(const std::string& path, const PointCloud& cloud) {
  cloud.validate();
  const bool with_conf = !cloud.confidence.empty();
  std::ostringstream out;
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty double x\nproperty double y\nproperty double z\n";
  if (with_conf) out << "property double confidence\n";
  out << "element face 0\nproperty list uchar int vertex_indices\nend_header\n";
  for (size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    out << fmt(p.x()) << ' ' << fmt(p.y()) << ' ' << fmt(p.z());
    if (with_conf) out << ' ' << fmt(cloud.confidence[i]);
    out << '\n';
  }
  spit(path, out.str());
}

namespace {

struct PlyHeader {
  size_t vertex_count = 0;
  size_t face_count = 0;
  bool has_confidence = false;
};

PlyHeader read_ply_header(std::istream& in, const std::string& path) {
  PlyHeader h;
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw ParseError(path + ": not a PLY file");
  std::string element;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "end_header") return h;
    if (word == "element") {
      size_t count = 0;
      ls >> element >> count;
      if (element == "vertex") h.vertex_count = count;
      if (element == "face") h.face_count = count;
    } else if (word == "property" && element == "vertex") {
      std::string type, name;
      ls >> type >> name;
      if (name == "confidence") h.has_confidence = true;
    }
  }
  throw ParseError(path + ": unterminated PLY header");
}

}  // namespace

PointCloud read_point_cloud_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  const PlyHeader h = read_ply_header(in, path);
  PointCloud cloud;
  cloud.points.reserve(h.vertex_count);
  for (size_t i = 0; i < h.vertex_count; ++i) {
    double x, y, z;
    if (!(in >> x >> y >> z)) throw ParseError(path + ": truncated vertex data");
    cloud.points.emplace_back(x, y, z);
    if (h.has_confidence) {
      double c;
      if (!(in >> c)) throw ParseError(path + ": truncated confidence data");
      cloud.confidence.push_back(c);
    }
  }
  cloud.validate();
  return cloud;
}

void write_mesh_ply(const std::string& path, const TriangleMesh& mesh) {
  std::ostringstream out;
  out << "ply\nformat ascii 1.0\nelement vertex " << mesh.vertices.size()
      << "\nproperty double x\nproperty double y\nproperty double z\nelement face "
      << mesh.faces.size() << "\nproperty list uchar int vertex_indices\nend_header\n";
  for (const Vec3& v : mesh.vertices)
    out << fmt(v.x()) << ' ' << fmt(v.y()) << ' ' << fmt(v.z()) << '\n';
  for (const auto& f : mesh.faces)
    out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  spit(path, out.str());
}

TriangleMesh read_mesh_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  const PlyHeader h = read_ply_header(in, path);
  TriangleMesh mesh;
  for (size_t i = 0; i < h.vertex_count; ++i) {
    double x, y, z;
    if (!(in >> x >> y >> z)) throw ParseError(path + ": truncated vertex data");
    mesh.vertices.emplace_back(x, y, z);
  }
  for (size_t i = 0; i < h.face_count; ++i) {
    int n, a, b, c;
    if (!(in >> n >> a >> b >> c) || n != 3)
      throw ParseError(path + ": only triangle faces are supported");
    mesh.faces.push_back({a, b, c});
  }
  return mesh;
}

namespace {

void write_pgm16(const std::string& path, const DepthFrame& f) {
  std::ostringstream out;
  out << "P5\n" << f.width << " " << f.height << "\n65535\n";
  for (float d : f.depth) {
    const double mm = std::clamp(std::round(d * 1000.0), 0.0, 65535.0);
    const uint16_t v = static_cast<uint16_t>(mm);
    out.put(static_cast<char>(v >> 8));  // big-endian per the Netpbm spec
    out.put(static_cast<char>(v & 0xFF));
  }
  spit(path, out.str());
}

std::vector<float> read_pgm16(const std::string& path, int& width, int& height) {
  const std::string data = slurp(path);
  std::istringstream in(data);
  std::string magic;
  int maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (magic != "P5" || maxval != 65535)
    throw ParseError(path + ": expected a 16-bit P5 PGM");
  in.get();  // single whitespace after maxval
  const size_t offset = static_cast<size_t>(in.tellg());
  const size_t expected = static_cast<size_t>(width) * height * 2;
  if (data.size() - offset < expected) throw ParseError(path + ": truncated PGM data");
  std::vector<float> depth(static_cast<size_t>(width) * height);
  for (size_t i = 0; i < depth.size(); ++i) {
    const uint8_t hi = static_cast<uint8_t>(data[offset + 2 * i]);
    const uint8_t lo = static_cast<uint8_t>(data[offset + 2 * i + 1]);
    depth[i] = static_cast<float>(((hi << 8) | lo) / 1000.0);
  }
  return depth;
}

void write_f32d(const std::string& path, const DepthFrame& f) {
  std::ostringstream out;
  out.write("WFMD", 4);
  const uint32_t w = f.width, h = f.height;
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  out.write(reinterpret_cast<const char*>(f.depth.data()), f.depth.size() * sizeof(float));
  spit(path, out.str());
}

std::vector<float> read_f32d(const std::string& path, int& width, int& height) {
  const std::string data = slurp(path);
  if (data.size() < 12 || std::memcmp(data.data(), "WFMD", 4) != 0)
    throw ParseError(path + ": not a WFMD float32 depth file");
  uint32_t w = 0, h = 0;
  std::memcpy(&w, data.data() + 4, 4);
  std::memcpy(&h, data.data() + 8, 4);
  const size_t expected = 12 + static_cast<size_t>(w) * h * sizeof(float);
  if (data.size() < expected) throw ParseError(path + ": truncated depth data");
  width = static_cast<int>(w);
  height = static_cast<int>(h);
  std::vector<float> depth(static_cast<size_t>(w) * h);
  std::memcpy(depth.data(), data.data() + 12, depth.size() * sizeof(float));
  return depth;
}

}  // namespace

void write_depth_dir(const std::string& dir, const std::vector<DepthFrame>& frames,
                     DepthFormat format) {
  fs::create_directories(dir);
  json index = json::array();
  for (size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.%s", i,
                  format == DepthFormat::kPgmMillimeters ? "pgm" : "f32d");
    const std::string file = join_path(dir, name);
    if (format == DepthFormat::kPgmMillimeters)
      write_pgm16(file, frames[i]);
    else
      write_f32d(file, frames[i]);
    json jf = jpose(frames[i].pose);
    jf["file"] = name;
    jf["intrinsics"] = jintrinsics(frames[i].intrinsics);
    jf["scene_class"] = scene_class_name(frames[i].scene_class);
    index.push_back(jf);
  }
  dump(join_path(dir, "index.json"), {{"frames", index}});
}

std::vector<DepthFrame> read_depth_dir(const std::string& dir) {
  const std::string index_path = join_path(dir, "index.json");
  const json j = parse(index_path);
  std::vector<DepthFrame> out;
  for (const json& jf : require(j, "frames", index_path)) {
    const std::string name = require(jf, "file", index_path).get<std::string>();
    const std::string file = join_path(dir, name);
    int w = 0, h = 0;
    std::vector<float> depth;
    if (name.ends_with(".pgm"))
      depth = read_pgm16(file, w, h);
    else if (name.ends_with(".f32d"))
      depth = read_f32d(file, w, h);
    else
      throw ParseError(index_path + ": unknown depth format for " + name);
    out.push_back(DepthFrame::make(
        std::move(depth), w, h, to_pose(jf, index_path),
        to_intrinsics(require(jf, "intrinsics", index_path), index_path),
        to_scene_class(require(jf, "scene_class", index_path).get<std::string>(),
                       index_path)));
  }
  return out;
}

void write_skeleton_params(const std::string& path, const SkeletonParams& params) {
  json shape = json::array();
  for (int i = 0; i < params.shape.size(); ++i) shape.push_back(params.shape[i]);
  json frames = json::array();
  for (const FramePose& f : params.frames) {
    json body = json::array();
    for (int i = 0; i < f.body_pose.size(); ++i) body.push_back(f.body_pose[i]);
    frames.push_back({{"global", jvec3(f.global_orientation)},
                      {"body", body},
                      {"root", jvec3(f.root_translation)}});
  }
  dump(path, {{"shape", shape}, {"frames", frames}});
}

SkeletonParams read_skeleton_params(const std::string& path) {
  const json j = parse(path);
  SkeletonParams out;
  const json shape = require(j, "shape", path);
  out.shape.resize(shape.size());
  for (size_t i = 0; i < shape.size(); ++i) out.shape[i] = shape[i].get<double>();
  for (const json& jf : require(j, "frames", path)) {
    FramePose f;
    f.global_orientation = to_vec3(require(jf, "global", path));
    const json body = require(jf, "body", path);
    f.body_pose.resize(body.size());
    for (size_t i = 0; i < body.size(); ++i) f.body_pose[i] = body[i].get<double>();
    f.root_translation = to_vec3(require(jf, "root", path));
    out.frames.push_back(std::move(f));
  }
  return out;
}

void write_keypoints3d(const std::string& path, const std::vector<Keypoint3DFrame>& frames) {
  json jframes = json::array();
  for (const Keypoint3DFrame& f : frames) {
    json joints = json::array();
    for (const TriangulatedJoint& joint : f.joints) {
      joints.push_back({{"p", jvec3(joint.position)},
                        {"residual_px", joint.residual_px},
                        {"status", to_string(joint.status)}});
    }
    jframes.push_back({{"frame", f.frame}, {"joints", joints}});
  }
  dump(path, {{"frames", jframes}});
}

std::vector<Keypoint3DFrame> read_keypoints3d(const std::string& path) {
  const json j = parse(path);
  std::vector<Keypoint3DFrame> out;
  for (const json& jf : require(j, "frames", path)) {
    Keypoint3DFrame f;
    f.frame = require(jf, "frame", path).get<int>();
    for (const json& jj : require(jf, "joints", path)) {
      TriangulatedJoint joint;
      joint.position = to_vec3(require(jj, "p", path));
      joint.residual_px = require(jj, "residual_px", path).get<double>();
      const std::string status = require(jj, "status", path).get<std::string>();
      if (status == "valid")
        joint.status = JointStatus::kValid;
      else if (status == "too_few_confident_views")
        joint.status = JointStatus::kTooFewConfidentViews;
      else if (status == "degenerate_rays")
        joint.status = JointStatus::kDegenerateRays;
      else
        throw ParseError(path + ": unknown joint status " + status);
      f.joints.push_back(joint);
    }
    out.push_back(std::move(f));
  }
  return out;
}

void write_joint_sequence(const std::string& path, const JointSequence& sequence) {
  json frames = json::array();
  for (const auto& frame : sequence.frames) {
    json joints = json::array();
    for (const Vec3& p : frame) joints.push_back(jvec3(p));
    frames.push_back(joints);
  }
  dump(path, {{"fps", sequence.fps}, {"frames", frames}});
}

JointSequence read_joint_sequence(const std::string& path) {
  const json j = parse(path);
  JointSequence out;
  out.fps = require(j, "fps", path).get<double>();
  for (const json& jf : require(j, "frames", path)) {
    std::vector<Vec3> joints;
    for (const json& jp : jf) joints.push_back(to_vec3(jp));
    out.frames.push_back(std::move(joints));
  }
  return out;
}

void write_contacts(const std::string& path, const ContactAnnotation& annotation) {
  json markers = json::array();
  for (const ContactMarker& m : annotation.markers)
    markers.push_back({{"frame", m.frame}, {"position", jvec3(m.position)}, {"z", m.z}});
  dump(path, {{"markers", markers}});
}

ContactAnnotation read_contacts(const std::string& path) {
  const json j = parse(path);
  ContactAnnotation out;
  for (const json& jm : require(j, "markers", path)) {
    ContactMarker m;
    m.frame = require(jm, "frame", path).get<int>();
    m.position = to_vec3(require(jm, "position", path));
    m.z = require(jm, "z", path).get<double>();
    out.markers.push_back(m);
  }
  return out;
}

namespace {

json jsimilarity(const SimilarityTransform& t) {
  const std::array<double, 4> q = canonical_quat(t.rotation);  // wxyz
  return {{"scale", t.scale},
          {"q", json::array({q[1], q[2], q[3], q[0]})},
          {"t", jvec3(t.translation)}};
}

SimilarityTransform to_similarity(const json& j, const std::string& path) {
  const json& q = require(j, "q", path);
  Quat quat(q[3].get<double>(), q[0].get<double>(), q[1].get<double>(),
            q[2].get<double>());
  if (std::abs(quat.squaredNorm() - 1.0) > 1e-9) quat.normalize();
  return SimilarityTransform(require(j, "scale", path).get<double>(),
                             quat.toRotationMatrix(),
                             to_vec3(require(j, "t", path)));
}

}  // namespace

void write_chunk_alignment(const std::string& path, const ChunkAlignment& alignment) {
  json per_chunk = json::array(), cumulative = json::array();
  for (const auto& t : alignment.per_chunk) per_chunk.push_back(jsimilarity(t));
  for (const auto& t : alignment.cumulative) cumulative.push_back(jsimilarity(t));
  dump(path, {{"per_chunk", per_chunk}, {"cumulative", cumulative}});
}

ChunkAlignment read_chunk_alignment(const std::string& path) {
  const json j = parse(path);
  ChunkAlignment out;
  for (const json& jt : require(j, "per_chunk", path))
    out.per_chunk.push_back(to_similarity(jt, path));
  for (const json& jt : require(j, "cumulative", path))
    out.cumulative.push_back(to_similarity(jt, path));
  return out;
}

void write_depth_samples(const std::string& path, const std::vector<DepthSample>& samples) {
  json js = json::array();
  for (const DepthSample& s : samples)
    js.push_back({{"view", s.view}, {"frame", s.frame}, {"joint", s.joint}, {"depth", s.depth}});
  dump(path, {{"samples", js}});
}

std::vector<DepthSample> read_depth_samples(const std::string& path) {
  const json j = parse(path);
  std::vector<DepthSample> out;
  for (const json& js : require(j, "samples", path)) {
    DepthSample s;
    s.view = require(js, "view", path).get<int>();
    s.frame = require(js, "frame", path).get<int>();
    s.joint = require(js, "joint", path).get<int>();
    s.depth = require(js, "depth", path).get<double>();
    out.push_back(s);
  }
  return out;
}

void write_report(const std::string& path,
                  const std::vector<std::pair<std::string, double>>& values) {
  json j = json::object();
  json order = json::array();
  for (const auto& [name, value] : values) {
    j[name] = value;
    order.push_back(name);
  }
  dump(path, {{"metrics", j}, {"order", order}});
}

std::vector<std::pair<std::string, double>> read_report(const std::string& path) {
  const json j = parse(path);
  const json metrics = require(j, "metrics", path);
  std::vector<std::pair<std::string, double>> out;
  for (const json& name : require(j, "order", path))
    out.push_back({name.get<std::string>(), metrics.at(name.get<std::string>()).get<double>()});
  return out;
}

PipelineConfig::PipelineConfig() {
  const FitConfig fit_defaults;
  fit_stage1 = fit_defaults.stage1;
  fit_stage2 = fit_defaults.stage2;
  contact_adam.learning_rate = 3e-2;
  contact_adam.max_iterations = 1200;
  contact_adam.lr_decay = 1e-4;
}

namespace {

void read_adam(const json& j, AdamOptions& o) {
  if (j.contains("learning_rate")) o.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("beta1")) o.beta1 = j["beta1"].get<double>();
  if (j.contains("beta2")) o.beta2 = j["beta2"].get<double>();
  if (j.contains("epsilon")) o.epsilon = j["epsilon"].get<double>();
  if (j.contains("clip_norm")) o.clip_norm = j["clip_norm"].get<double>();
  if (j.contains("max_iterations")) o.max_iterations = j["max_iterations"].get<int>();
  if (j.contains("tolerance")) o.tolerance = j["tolerance"].get<double>();
  if (j.contains("window")) o.window = j["window"].get<int>();
  if (j.contains("lr_decay")) o.lr_decay = j["lr_decay"].get<double>();
}

void read_config(const json& j, PipelineConfig& c) {
  if (j.contains("loss_weights")) {
    const json& w = j["loss_weights"];
    if (w.contains("track")) c.loss_weights.track = w["track"].get<double>();
    if (w.contains("chamfer")) c.loss_weights.chamfer = w["chamfer"].get<double>();
    if (w.contains("ba")) c.loss_weights.ba = w["ba"].get<double>();
  }
  if (j.contains("calibrate")) read_adam(j["calibrate"], c.calib_adam);
  if (j.contains("triangulation")) {
    const json& t = j["triangulation"];
    if (t.contains("confidence_gate"))
      c.triangulation.confidence_gate = t["confidence_gate"].get<double>();
    if (t.contains("min_angle_deg"))
      c.triangulation.min_angle_deg = t["min_angle_deg"].get<double>();
  }
  if (j.contains("fit_weights")) {
    const json& w = j["fit_weights"];
    if (w.contains("kp3d")) c.fit_weights.kp3d = w["kp3d"].get<double>();
    if (w.contains("smooth")) c.fit_weights.smooth = w["smooth"].get<double>();
    if (w.contains("prior")) c.fit_weights.prior = w["prior"].get<double>();
    if (w.contains("reproj")) c.fit_weights.reproj = w["reproj"].get<double>();
  }
  if (j.contains("fit_stage1")) read_adam(j["fit_stage1"], c.fit_stage1);
  if (j.contains("fit_stage2")) read_adam(j["fit_stage2"], c.fit_stage2);
  if (j.contains("contact")) read_adam(j["contact"], c.contact_adam);
  if (j.contains("fusion")) {
    const json& f = j["fusion"];
    if (f.contains("voxel")) c.fusion_voxel = f["voxel"].get<double>();
    if (f.contains("truncation_factor"))
      c.fusion_truncation_factor = f["truncation_factor"].get<double>();
    if (f.contains("min_component_fraction"))
      c.clean_min_component_fraction = f["min_component_fraction"].get<double>();
    if (f.contains("outlier_sigma")) c.clean_outlier_sigma = f["outlier_sigma"].get<double>();
  }
  if (j.contains("metrics")) {
    const json& m = j["metrics"];
    if (m.contains("chunk")) c.metrics_chunk = m["chunk"].get<int>();
    if (m.contains("jitter_contact_height"))
      c.jitter_contact_height = m["jitter_contact_height"].get<double>();
  }
}

json adam_json(const AdamOptions& o) {
  return {{"learning_rate", o.learning_rate}, {"beta1", o.beta1},
          {"beta2", o.beta2},                 {"epsilon", o.epsilon},
          {"clip_norm", o.clip_norm},         {"max_iterations", o.max_iterations},
          {"tolerance", o.tolerance},         {"window", o.window},
          {"lr_decay", o.lr_decay}};
}

}  // namespace

SessionManifest read_manifest(const std::string& path) {
  const json j = parse(path);
  SessionManifest m;
  m.base_dir = fs::path(path).parent_path().string();
  for (const json& jv : require(j, "views", path)) {
    ManifestView v;
    v.id = require(jv, "id", path).get<std::string>();
    v.trajectory = require(jv, "trajectory", path).get<std::string>();
    if (jv.contains("keypoints")) v.keypoints = jv["keypoints"].get<std::string>();
    if (jv.contains("cloud")) v.cloud = jv["cloud"].get<std::string>();
    if (jv.contains("registered")) v.registered = jv["registered"].get<std::string>();
    m.views.push_back(v);
  }
  if (j.contains("tracks")) m.tracks = j["tracks"].get<std::string>();
  if (j.contains("landmarks")) m.landmarks = j["landmarks"].get<std::string>();
  if (j.contains("global_cloud")) m.global_cloud = j["global_cloud"].get<std::string>();
  if (j.contains("depth_dir")) m.depth_dir = j["depth_dir"].get<std::string>();
  if (j.contains("gt_joints")) m.gt_joints = j["gt_joints"].get<std::string>();
  if (j.contains("contacts")) m.contacts = j["contacts"].get<std::string>();
  if (j.contains("depth_samples")) m.depth_samples = j["depth_samples"].get<std::string>();
  if (j.contains("frame_offset")) m.frame_offset = j["frame_offset"].get<int>();
  if (j.contains("scene_class"))
    m.scene_class = to_scene_class(j["scene_class"].get<std::string>(), path);
  if (j.contains("config")) read_config(j["config"], m.config);
  return m;
}

void write_manifest(const std::string& path, const SessionManifest& m) {
  json views = json::array();
  for (const ManifestView& v : m.views) {
    json jv = {{"id", v.id}, {"trajectory", v.trajectory}};
    if (!v.keypoints.empty()) jv["keypoints"] = v.keypoints;
    if (!v.cloud.empty()) jv["cloud"] = v.cloud;
    if (!v.registered.empty()) jv["registered"] = v.registered;
    views.push_back(jv);
  }
  json j = {{"views", views},
            {"frame_offset", m.frame_offset},
            {"scene_class", scene_class_name(m.scene_class)}};
  if (!m.tracks.empty()) j["tracks"] = m.tracks;
  if (!m.landmarks.empty()) j["landmarks"] = m.landmarks;
  if (!m.global_cloud.empty()) j["global_cloud"] = m.global_cloud;
  if (!m.depth_dir.empty()) j["depth_dir"] = m.depth_dir;
  if (!m.gt_joints.empty()) j["gt_joints"] = m.gt_joints;
  if (!m.contacts.empty()) j["contacts"] = m.contacts;
  if (!m.depth_samples.empty()) j["depth_samples"] = m.depth_samples;
  j["config"] = {{"loss_weights",
                  {{"track", m.config.loss_weights.track},
                   {"chamfer", m.config.loss_weights.chamfer},
                   {"ba", m.config.loss_weights.ba}}},
                 {"calibrate", adam_json(m.config.calib_adam)},
                 {"triangulation",
                  {{"confidence_gate", m.config.triangulation.confidence_gate},
                   {"min_angle_deg", m.config.triangulation.min_angle_deg}}},
                 {"fit_weights",
                  {{"kp3d", m.config.fit_weights.kp3d},
                   {"smooth", m.config.fit_weights.smooth},
                   {"prior", m.config.fit_weights.prior},
                   {"reproj", m.config.fit_weights.reproj}}},
                 {"fit_stage1", adam_json(m.config.fit_stage1)},
                 {"fit_stage2", adam_json(m.config.fit_stage2)},
                 {"contact", adam_json(m.config.contact_adam)},
                 {"fusion",
                  {{"voxel", m.config.fusion_voxel},
                   {"truncation_factor", m.config.fusion_truncation_factor},
                   {"min_component_fraction", m.config.clean_min_component_fraction},
                   {"outlier_sigma", m.config.clean_outlier_sigma}}},
                 {"metrics",
                  {{"chunk", m.config.metrics_chunk},
                   {"jitter_contact_height", m.config.jitter_contact_height}}}};
  dump(path, j);
}

std::string join_path(const std::string& dir, const std::string& leaf) {
  if (dir.empty()) return leaf;
  return (fs::path(dir) / leaf).string();
}

Session load_session(const SessionManifest& m) {
  if (m.views.empty()) throw ParseError("manifest lists no views");
  Session s;
  s.scene_class = m.scene_class;
  const auto resolve = [&m](const std::string& p) { return join_path(m.base_dir, p); };

  LandmarkData landmarks;
  if (!m.landmarks.empty()) landmarks = read_landmarks(resolve(m.landmarks));
  s.landmark_points = landmarks.points;

  for (size_t v = 0; v < m.views.size(); ++v) {
    const ManifestView& mv = m.views[v];
    s.view_ids.push_back(mv.id);
    Trajectory traj = read_trajectory(resolve(mv.trajectory));
    std::vector<Keypoint2DFrame> kps;
    if (!mv.keypoints.empty()) kps = read_keypoints(resolve(mv.keypoints));
    std::vector<std::pair<int, Pose>> reg;
    if (!mv.registered.empty()) reg = read_registered(resolve(mv.registered));
    std::vector<LandmarkObservation> obs;
    if (landmarks.observations.count(mv.id)) obs = landmarks.observations.at(mv.id);

    // The temporal sync offset drops the head of every view-2 stream.
    const int drop = (v == 1) ? m.frame_offset : 0;
    if (drop > 0) {
      if (drop >= static_cast<int>(traj.size()))
        throw FrameMisalignment("frame offset larger than the view-2 trajectory");
      traj.frames.erase(traj.frames.begin(), traj.frames.begin() + drop);
      if (!kps.empty()) {
        if (drop >= static_cast<int>(kps.size()))
          throw FrameMisalignment("frame offset larger than the view-2 keypoints");
        kps.erase(kps.begin(), kps.begin() + drop);
      }
      std::vector<std::pair<int, Pose>> shifted;
      for (const auto& [frame, pose] : reg)
        if (frame >= drop) shifted.push_back({frame - drop, pose});
      reg = std::move(shifted);
    }
    for (int t = 0; t < static_cast<int>(kps.size()); ++t) kps[t].frame = t;

    s.trajectories.push_back(std::move(traj));
    s.keypoints.push_back(std::move(kps));
    s.registered.push_back(std::move(reg));
    s.landmark_obs.push_back(std::move(obs));
    s.clouds.push_back(mv.cloud.empty() ? PointCloud{}
                                        : read_point_cloud_ply(resolve(mv.cloud)));
  }

  // Cut all per-frame streams to the common length.
  size_t common = s.trajectories[0].size();
  for (const Trajectory& t : s.trajectories) common = std::min(common, t.size());
  for (const auto& k : s.keypoints)
    if (!k.empty()) common = std::min(common, k.size());
  for (size_t v = 0; v < s.trajectories.size(); ++v) {
    s.trajectories[v].frames.resize(common);
    if (!s.keypoints[v].empty()) s.keypoints[v].resize(common);
    std::vector<std::pair<int, Pose>> reg;
    for (const auto& [frame, pose] : s.registered[v])
      if (frame < static_cast<int>(common)) reg.push_back({frame, pose});
    s.registered[v] = std::move(reg);
    std::vector<LandmarkObservation> obs;
    for (const LandmarkObservation& o : s.landmark_obs[v])
      if (o.frame < static_cast<int>(common)) obs.push_back(o);
    s.landmark_obs[v] = std::move(obs);
  }

  if (!m.tracks.empty()) {
    for (const TrackedCorrespondence& c : read_tracks(resolve(m.tracks)))
      if (c.frame < static_cast<int>(common)) s.tracks.push_back(c);
  }
  if (!m.global_cloud.empty())
    s.global_cloud = read_point_cloud_ply(resolve(m.global_cloud));
  return s;
}

}  // namespace wfm::io
