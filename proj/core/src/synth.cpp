#include "wfm/synth.hpp"

#include <cmath>
#include <map>
#include <limits>
#include <random>

#include "wfm/alignment.hpp"

namespace wfm::synth {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double ray_box(const Primitive& box, const Vec3& o, const Vec3& d) {
  double t_near = -kInf, t_far = kInf;
  for (int a = 0; a < 3; ++a) {
    const double lo = box.center[a] - box.half_extents[a];
    const double hi = box.center[a] + box.half_extents[a];
    if (std::abs(d[a]) < 1e-12) {
      if (o[a] < lo || o[a] > hi) return kInf;
      continue;
    }
    double t0 = (lo - o[a]) / d[a], t1 = (hi - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return kInf;
  }
  return t_near > 1e-6 ? t_near : kInf;
}

double ray_sphere(const Primitive& s, const Vec3& o, const Vec3& d) {
  // General quadratic; directions are not assumed normalized.
  const double r = s.half_extents.x();
  const Vec3 oc = o - s.center;
  const double a = d.squaredNorm();
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - r * r;
  const double disc = b * b - a * c;
  if (disc < 0.0 || !(a > 0.0)) return kInf;
  const double sq = std::sqrt(disc);
  const double t0 = (-b - sq) / a, t1 = (-b + sq) / a;
  if (t0 > 1e-6) return t0;
  if (t1 > 1e-6) return t1;
  return kInf;
}

double ray_rect(const Primitive& rect, const Vec3& o, const Vec3& d) {
  const int a = rect.axis;
  if (std::abs(d[a]) < 1e-12) return kInf;
  const double t = (rect.center[a] - o[a]) / d[a];
  if (t <= 1e-6) return kInf;
  const Vec3 p = o + t * d;
  for (int i = 0; i < 3; ++i) {
    if (i == a) continue;
    if (std::abs(p[i] - rect.center[i]) > rect.half_extents[i]) return kInf;
  }
  return t;
}

double box_distance(const Primitive& box, const Vec3& p) {
  const Vec3 q = (p - box.center).cwiseAbs() - box.half_extents;
  const double outside = q.cwiseMax(0.0).norm();
  const double inside = std::min(q.maxCoeff(), 0.0);
  return std::abs(outside + inside);
}

double rect_distance(const Primitive& rect, const Vec3& p) {
  Vec3 q = p - rect.center;
  const double plane = q[rect.axis];
  q[rect.axis] = 0.0;
  Vec3 he = rect.half_extents;
  he[rect.axis] = 0.0;
  const Vec3 excess = (q.cwiseAbs() - he).cwiseMax(0.0);
  return std::sqrt(plane * plane + excess.squaredNorm());
}

}  // namespace

double cast_ray(const Scene& scene, const Vec3& origin, const Vec3& direction) {
  double best = kInf;
  for (const Primitive& prim : scene.primitives) {
    double t = kInf;
    switch (prim.kind) {
      case Primitive::Kind::kBox:
        t = ray_box(prim, origin, direction);
        break;
      case Primitive::Kind::kSphere:
        t = ray_sphere(prim, origin, direction);
        break;
      case Primitive::Kind::kRect:
        t = ray_rect(prim, origin, direction);
        break;
    }
    best = std::min(best, t);
  }
  return best;
}

double surface_distance(const Scene& scene, const Vec3& p) {
  double best = kInf;
  for (const Primitive& prim : scene.primitives) {
    double d = kInf;
    switch (prim.kind) {
      case Primitive::Kind::kBox:
        d = box_distance(prim, p);
        break;
      case Primitive::Kind::kSphere:
        d = std::abs((p - prim.center).norm() - prim.half_extents.x());
        break;
      case Primitive::Kind::kRect:
        d = rect_distance(prim, p);
        break;
    }
    best = std::min(best, d);
  }
  return best;
}

DepthFrame render_depth(const Scene& scene, const Pose& pose, const Intrinsics& in,
                        SceneClass scene_class) {
  std::vector<float> depth(static_cast<size_t>(in.width) * in.height, 0.0f);
  const Mat3 r_t = pose.rotation.transpose();
  const Vec3 origin = pose.center();
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      const Vec3 dir_cam((x + 0.5 - in.cx) / in.fx, (y + 0.5 - in.cy) / in.fy, 1.0);
      const Vec3 dir = r_t * dir_cam;  // not normalized: t equals camera-frame z
      const double t = cast_ray(scene, origin, dir);
      if (std::isfinite(t)) depth[static_cast<size_t>(y) * in.width + x] = static_cast<float>(t);
    }
  }
  return DepthFrame::make(std::move(depth), in.width, in.height, pose, in, scene_class);
}

Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 axis = forward.cross(up);
  if (axis.norm() < 1e-9) axis = forward.cross(Vec3(0, 1, 0));
  const Vec3 x_cam = axis.normalized();
  const Vec3 y_cam = forward.cross(x_cam);
  Mat3 r;
  r.row(0) = x_cam;
  r.row(1) = y_cam;
  r.row(2) = forward;
  return Pose(r, -(r * eye));
}

namespace {

void append_quad(TriangleMesh& mesh, const Vec3& a, const Vec3& b, const Vec3& c,
                 const Vec3& d) {
  const int v0 = static_cast<int>(mesh.vertices.size());
  mesh.vertices.insert(mesh.vertices.end(), {a, b, c, d});
  mesh.faces.push_back({v0, v0 + 1, v0 + 2});
  mesh.faces.push_back({v0, v0 + 2, v0 + 3});
}

void append_box(TriangleMesh& mesh, const Primitive& box) {
  const Vec3& c = box.center;
  const Vec3& h = box.half_extents;
  Vec3 corner[8];
  for (int i = 0; i < 8; ++i)
    corner[i] = c + Vec3((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(),
                         (i & 4) ? h.z() : -h.z());
  append_quad(mesh, corner[1], corner[3], corner[7], corner[5]);  // +x
  append_quad(mesh, corner[0], corner[4], corner[6], corner[2]);  // -x
  append_quad(mesh, corner[2], corner[6], corner[7], corner[3]);  // +y
  append_quad(mesh, corner[0], corner[1], corner[5], corner[4]);  // -y
  append_quad(mesh, corner[4], corner[5], corner[7], corner[6]);  // +z
  append_quad(mesh, corner[0], corner[2], corner[3], corner[1]);  // -z
}

void append_icosphere(TriangleMesh& mesh, const Primitive& sphere, int subdivisions) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {{-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
                             {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
                             {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1}};
  for (Vec3& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::vector<std::array<int, 3>> next;
    std::map<std::pair<int, int>, int> midpoint;
    const auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int idx = static_cast<int>(verts.size());
      verts.push_back((0.5 * (verts[a] + verts[b])).normalized());
      midpoint.emplace(key, idx);
      return idx;
    };
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  const int base = static_cast<int>(mesh.vertices.size());
  const double r = sphere.half_extents.x();
  for (const Vec3& v : verts) mesh.vertices.push_back(sphere.center + r * v);
  for (const auto& f : faces)
    mesh.faces.push_back({base + f[0], base + f[1], base + f[2]});
}

}  // namespace

TriangleMesh primitive_mesh(const Scene& scene) {
  TriangleMesh mesh;
  for (const Primitive& prim : scene.primitives) {
    switch (prim.kind) {
      case Primitive::Kind::kBox:
        append_box(mesh, prim);
        break;
      case Primitive::Kind::kSphere:
        append_icosphere(mesh, prim, 2);
        break;
      case Primitive::Kind::kRect: {
        Vec3 u = Vec3::Zero(), v = Vec3::Zero();
        u[(prim.axis + 1) % 3] = prim.half_extents[(prim.axis + 1) % 3];
        v[(prim.axis + 2) % 3] = prim.half_extents[(prim.axis + 2) % 3];
        append_quad(mesh, prim.center - u - v, prim.center + u - v, prim.center + u + v,
                    prim.center - u + v);
        break;
      }
    }
  }
  return mesh;
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double gauss(Rng& rng, double sigma) {
  return sigma > 0.0 ? std::normal_distribution<double>(0.0, sigma)(rng) : 0.0;
}

Vec3 gauss3(Rng& rng, double sigma) {
  return {gauss(rng, sigma), gauss(rng, sigma), gauss(rng, sigma)};
}

double smoothstep01(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

Scene build_scene(Rng& rng, const SceneSpec& spec) {
  Scene scene;
  scene.scene_class = spec.scene_class;
  const double e = spec.extent;

  Primitive floor;
  floor.kind = Primitive::Kind::kRect;
  floor.center = Vec3(0, 0, 0);
  floor.half_extents = Vec3(e, e, 0);
  floor.axis = 2;
  scene.primitives.push_back(floor);

  if (spec.scene_class == SceneClass::kIndoor) {
    for (int side = 0; side < 4; ++side) {
      Primitive wall;
      wall.kind = Primitive::Kind::kRect;
      wall.axis = side < 2 ? 0 : 1;
      const double sign = (side % 2 == 0) ? 1.0 : -1.0;
      wall.center = Vec3::Zero();
      wall.center[wall.axis] = sign * e;
      wall.center.z() = 1.5;
      wall.half_extents = Vec3(e, e, 1.5);
      wall.half_extents[wall.axis] = 0.0;
      scene.primitives.push_back(wall);
    }
  }

  // Clutter placed away from the performer's path along the x axis.
  for (int i = 0; i < spec.box_count; ++i) {
    Primitive box;
    box.kind = Primitive::Kind::kBox;
    const double side_sign = (i % 2 == 0) ? 1.0 : -1.0;
    box.half_extents = Vec3(uniform(rng, 0.15, 0.35), uniform(rng, 0.15, 0.35),
                            uniform(rng, 0.2, 0.45));
    box.center = Vec3(uniform(rng, -e + 1.0, e - 1.0),
                      side_sign * uniform(rng, 1.0, e - 0.7), box.half_extents.z());
    scene.primitives.push_back(box);
  }
  for (int i = 0; i < spec.sphere_count; ++i) {
    Primitive sphere;
    sphere.kind = Primitive::Kind::kSphere;
    const double r = uniform(rng, 0.12, 0.3);
    const double side_sign = (i % 2 == 0) ? -1.0 : 1.0;
    sphere.half_extents = Vec3(r, r, r);
    sphere.center = Vec3(uniform(rng, -e + 1.0, e - 1.0),
                         side_sign * uniform(rng, 1.0, e - 0.7), r);
    scene.primitives.push_back(sphere);
  }
  return scene;
}

Vec3 sample_surface_point(Rng& rng, const Scene& scene, bool floor_only) {
  while (true) {
    const size_t pick =
        floor_only ? 0 : static_cast<size_t>(uniform(rng, 0.0, 1.0) * scene.primitives.size());
    const Primitive& prim = scene.primitives[std::min(pick, scene.primitives.size() - 1)];
    switch (prim.kind) {
      case Primitive::Kind::kRect: {
        Vec3 p = prim.center;
        for (int a = 0; a < 3; ++a) {
          if (a == prim.axis) continue;
          p[a] += uniform(rng, -prim.half_extents[a], prim.half_extents[a]);
        }
        return p;
      }
      case Primitive::Kind::kSphere: {
        Vec3 dir = gauss3(rng, 1.0);
        if (dir.norm() < 1e-6) continue;
        return prim.center + prim.half_extents.x() * dir.normalized();
      }
      case Primitive::Kind::kBox: {
        // Face picked uniformly by index; fine for clutter sampling.
        const int face = static_cast<int>(uniform(rng, 0.0, 6.0)) % 6;
        const int axis = face / 2;
        const double sign = (face % 2 == 0) ? 1.0 : -1.0;
        Vec3 p = prim.center;
        p[axis] += sign * prim.half_extents[axis];
        for (int a = 0; a < 3; ++a) {
          if (a == axis) continue;
          p[a] += uniform(rng, -prim.half_extents[a], prim.half_extents[a]);
        }
        return p;
      }
    }
  }
}

struct MotionTables {
  SkeletonParams params;
  std::vector<std::vector<Vec3>> joints;
  std::vector<int> contact_frames;
};

// Procedural walk (or sit) with idle phases at both ends. Angles are smooth in
// the accumulated travel so the idle phases are exactly stationary.
MotionTables build_motion(Rng& rng, const SkeletonModel& model, const MotionSpec& spec) {
  const int frames = spec.frame_count;
  const int stand = std::min(spec.stand_frames, frames / 3);
  MotionTables out;
  out.params = SkeletonParams::rest(model, frames);
  for (int g = 0; g < SkeletonModel::kShapeDim; ++g)
    out.params.shape[g] = uniform(rng, -0.4, 0.4);

  const double root_height = 0.92;
  const int j_hip_l = 1, j_hip_r = 2, j_knee_l = 4, j_knee_r = 5;
  const int j_shoulder_l = 16, j_shoulder_r = 17, j_spine = 3;

  // Per-frame speed envelope; progress accumulates between the idle phases.
  std::vector<double> progress(frames, 0.0);
  std::vector<double> envelope(frames, 0.0);
  const double ramp = 6.0;
  for (int t = 1; t < frames; ++t) {
    const double a = smoothstep01((t - stand) / ramp);
    const double b = smoothstep01((frames - stand - t) / ramp);
    envelope[t] = a * b;
    progress[t] = progress[t - 1] + spec.speed * envelope[t] / spec.fps;
  }

  const double start_x = -progress[frames - 1] / 2.0;
  for (int t = 0; t < frames; ++t) {
    FramePose& f = out.params.frames[t];
    const double e = envelope[t];
    const double phase = 2.0 * M_PI * progress[t] / 0.8;  // one cycle per 0.8 m

    if (spec.kind == MotionSpec::Kind::kWalk) {
      f.root_translation =
          Vec3(start_x + progress[t], 0.0, root_height + 0.015 * std::sin(2.0 * phase) * e);
      f.global_orientation = Vec3(0.0, 0.0, 0.04 * std::sin(phase) * e);
      auto set_y = [&](int joint, double angle) {
        f.body_pose[3 * (joint - 1) + 1] = angle;
      };
      set_y(j_hip_l, 0.5 * std::sin(phase) * e);
      set_y(j_hip_r, 0.5 * std::sin(phase + M_PI) * e);
      set_y(j_knee_l, 0.45 * e * 0.5 * (1.0 - std::cos(phase - 0.4)));
      set_y(j_knee_r, 0.45 * e * 0.5 * (1.0 - std::cos(phase + M_PI - 0.4)));
      set_y(j_shoulder_l, -0.35 * std::sin(phase) * e);
      set_y(j_shoulder_r, -0.35 * std::sin(phase + M_PI) * e);
      f.body_pose[3 * (j_spine - 1) + 2] = 0.05 * std::sin(phase) * e;
    } else {
      // Sit: sink onto an imagined seat in front, staying in place.
      const double s = smoothstep01((t - stand) / 20.0);
      f.root_translation = Vec3(0.0, 0.0, root_height - 0.42 * s);
      auto set_y = [&](int joint, double angle) {
        f.body_pose[3 * (joint - 1) + 1] = angle;
      };
      set_y(j_hip_l, -1.45 * s);
      set_y(j_hip_r, -1.45 * s);
      set_y(j_knee_l, 1.5 * s);
      set_y(j_knee_r, 1.5 * s);
    }
  }

  out.joints.resize(frames);
  for (int t = 0; t < frames; ++t)
    out.joints[t] =
        forward_kinematics(model, out.params.shape, out.params.frames[t]).positions;
  out.contact_frames = {stand / 2, frames - 1 - stand / 2};
  return out;
}

ViewOffset draw_offset(Rng& rng) {
  ViewOffset o;
  o.yaw = uniform(rng, -0.5, 0.5);
  o.translation = Vec3(uniform(rng, -0.8, 0.8), uniform(rng, -0.8, 0.8),
                       uniform(rng, -0.15, 0.15));
  return o;
}

}  // namespace

CalibrationInput to_calibration_input(const Bundle& bundle) {
  CalibrationInput in;
  for (const ViewBundle& v : bundle.views) {
    ViewCalibrationInput view;
    view.trajectory = v.trajectory_view;
    view.cloud = v.cloud_view;
    view.landmarks = v.landmark_obs;
    in.views.push_back(std::move(view));
  }
  in.tracks = bundle.tracks;
  in.landmark_points = bundle.landmark_points;
  in.global_cloud = bundle.global_cloud;
  return in;
}

JointSequence gt_joint_sequence(const Bundle& bundle) {
  JointSequence seq;
  seq.frames = bundle.gt_joints;
  seq.fps = 30.0;
  return seq;
}

Bundle generate(uint64_t seed, const BundleSpec& spec) {
  Bundle bundle;
  bundle.seed = seed;
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL);

  bundle.scene = build_scene(rng, spec.scene);
  bundle.scene_mesh = primitive_mesh(bundle.scene);
  bundle.skeleton = SkeletonModel::default_human();

  MotionTables motion = build_motion(rng, bundle.skeleton, spec.motion);
  bundle.gt_params = std::move(motion.params);
  bundle.gt_joints = std::move(motion.joints);
  const int frames = spec.motion.frame_count;

  bundle.true_offsets[0] = spec.randomize_offsets ? draw_offset(rng) : ViewOffset{};
  bundle.true_offsets[1] = spec.randomize_offsets ? draw_offset(rng) : ViewOffset{};

  const Intrinsics intr(spec.cameras.fx, spec.cameras.fy, spec.cameras.width / 2.0,
                        spec.cameras.image_height / 2.0, spec.cameras.width,
                        spec.cameras.image_height);

  // Camera trajectories orbit the performer at the requested baseline split.
  // The ambiguity scene pins the views onto the world axes so each view's
  // landmark wall can be exactly fronto-parallel.
  const double base_azimuth = spec.ambiguity ? M_PI / 4.0 : M_PI / 2.0;
  const double half_baseline = 0.5 * spec.cameras.baseline_deg * M_PI / 180.0;
  for (int v = 0; v < 2; ++v) {
    ViewBundle& view = bundle.views[v];
    view.trajectory_scene.view_id = v == 0 ? "v1" : "v2";
    view.trajectory_scene.intrinsics = intr;
    const double azimuth0 = base_azimuth + (v == 0 ? half_baseline : -half_baseline);
    const double sway_phase = v == 0 ? 0.0 : 1.3;
    for (int t = 0; t < frames; ++t) {
      const double tau = t / spec.motion.fps;
      const Vec3 root = bundle.gt_joints[t][0];
      const double azimuth = azimuth0 + spec.cameras.orbit_amplitude *
                                             std::sin(2.0 * M_PI * 0.15 * tau + sway_phase);
      const Vec3 eye(root.x() + spec.cameras.distance * std::cos(azimuth),
                     root.y() + spec.cameras.distance * std::sin(azimuth),
                     spec.cameras.height + 0.05 * std::sin(2.0 * M_PI * 0.11 * tau));
      const Vec3 target(root.x(), root.y(), 1.0);
      TrajectoryFrame frame;
      frame.timestamp = tau;
      frame.pose = look_at(eye, target);
      view.trajectory_scene.frames.push_back(frame);
    }
    view.trajectory_view = apply_offset_to_trajectory(
        view.trajectory_scene, bundle.true_offsets[v].to_similarity().inverse());

    for (int t = 0; t < frames; t += spec.registered_stride)
      view.registered.push_back({t, view.trajectory_scene.frames[t].pose});

    // 2D keypoints of the ground-truth joints.
    for (int t = 0; t < frames; ++t) {
      Keypoint2DFrame kf;
      kf.frame = t;
      for (const Vec3& joint : bundle.gt_joints[t]) {
        Vec2 px = Vec2::Zero();
        double conf = 0.0;
        const Vec3 p_cam = view.trajectory_scene.frames[t].pose.to_camera(joint);
        if (p_cam.z() > 1e-9) {
          px = Vec2(intr.fx * p_cam.x() / p_cam.z() + intr.cx,
                    intr.fy * p_cam.y() / p_cam.z() + intr.cy);
          if (intr.contains(px)) conf = 1.0;
        }
        kf.pixels.push_back(px);
        kf.confidences.push_back(conf);
      }
      view.keypoints.push_back(std::move(kf));
    }
  }

  // Cross-view tracks: points sampled on the body, observed in both views.
  for (int t = 0; t < frames; ++t) {
    int made = 0, attempts = 0;
    while (made < spec.track_points_per_frame && attempts < spec.track_points_per_frame * 8) {
      ++attempts;
      const int j_count = bundle.skeleton.joint_count();
      const int j = 1 + static_cast<int>(uniform(rng, 0.0, j_count - 1.001));
      const int parent = bundle.skeleton.parents[j];
      const double u = uniform(rng, 0.0, 1.0);
      const Vec3 p = bundle.gt_joints[t][parent] +
                     u * (bundle.gt_joints[t][j] - bundle.gt_joints[t][parent]) +
                     gauss3(rng, 0.02);
      TrackedCorrespondence corr;
      corr.frame = t;
      bool ok = true;
      for (int v = 0; v < 2; ++v) {
        const Pose& pose = bundle.views[v].trajectory_scene.frames[t].pose;
        const Vec3 p_cam = pose.to_camera(p);
        if (!(p_cam.z() > 0.1)) {
          ok = false;
          break;
        }
        const Vec2 px(intr.fx * p_cam.x() / p_cam.z() + intr.cx,
                      intr.fy * p_cam.y() / p_cam.z() + intr.cy);
        if (!intr.contains(px)) {
          ok = false;
          break;
        }
        corr.pixel[v] = px;
        corr.depth[v] = p_cam.z();
        corr.confidence[v] = 1.0;
      }
      if (!ok) continue;
      bundle.tracks.push_back(corr);
      ++made;
    }
  }

  // Scene landmarks and their per-view sightings.
  const bool ambiguity = spec.ambiguity;
  std::array<Primitive, 2> ba_walls;
  if (ambiguity) {
    // One wall per view, fronto-parallel to that view's mean optical axis, so
    // landmark reprojection constrains the view weakly along its depth.
    for (int v = 0; v < 2; ++v) {
      const double azimuth = base_azimuth + (v == 0 ? half_baseline : -half_baseline);
      const double c = std::cos(azimuth), s = std::sin(azimuth);
      Primitive wall;
      wall.kind = Primitive::Kind::kRect;
      wall.axis = std::abs(c) >= std::abs(s) ? 0 : 1;
      const double component = wall.axis == 0 ? c : s;
      wall.center = Vec3::Zero();
      // Far beyond the performer on the camera's far side, with a small
      // angular footprint: lateral reprojection stays strong while the
      // along-axis (depth) sensitivity is tiny.
      wall.center[wall.axis] = component > 0.0 ? -6.0 : 6.0;
      wall.center.z() = 1.4;
      wall.half_extents = Vec3(0.45, 0.45, 0.45);
      wall.half_extents[wall.axis] = 0.0;
      ba_walls[v] = wall;
    }
  }

  for (int i = 0; i < spec.landmark_count; ++i) {
    Vec3 p;
    if (ambiguity) {
      const int v = i % 2;
      if (i < (spec.landmark_count * 3) / 5) {
        // Small distant wall: strong laterally, nearly blind along the
        // view's depth axis.
        const Primitive& wall = ba_walls[v];
        p = wall.center;
        for (int a = 0; a < 3; ++a) {
          if (a == wall.axis) continue;
          p[a] += uniform(rng, -wall.half_extents[a], wall.half_extents[a]);
        }
      } else {
        // Far bearing-only landmarks: they pin the yaw without contributing
        // translation information, which keeps the wall's lateral signal
        // from degenerating into a yaw compensation.
        const double azimuth = base_azimuth + (v == 0 ? half_baseline : -half_baseline);
        const Vec3 away(-std::cos(azimuth), -std::sin(azimuth), 0.0);
        const Vec3 lateral(-away.y(), away.x(), 0.0);
        p = 300.0 * away + uniform(rng, -75.0, 75.0) * lateral +
            Vec3(0, 0, uniform(rng, 2.0, 20.0));
      }
    } else {
      p = sample_surface_point(rng, bundle.scene, false);
    }
    bundle.landmark_points.push_back(p);
  }
  for (int v = 0; v < 2; ++v) {
    ViewBundle& view = bundle.views[v];
    for (int t = 0; t < frames; t += spec.landmark_stride) {
      const Pose& pose = view.trajectory_scene.frames[t].pose;
      for (size_t j = 0; j < bundle.landmark_points.size(); ++j) {
        if (ambiguity && static_cast<int>(j % 2) != v) continue;
        const Vec3 p_cam = pose.to_camera(bundle.landmark_points[j]);
        if (!(p_cam.z() > 0.1)) continue;
        const Vec2 px(intr.fx * p_cam.x() / p_cam.z() + intr.cx,
                      intr.fy * p_cam.y() / p_cam.z() + intr.cy);
        if (!intr.contains(px)) continue;
        LandmarkObservation obs;
        obs.frame = t;
        obs.landmark = static_cast<int>(j);
        obs.pixel = px;
        view.landmark_obs.push_back(obs);
      }
    }
  }

  // Global cloud; the per-view clouds are the same points expressed in each
  // device frame so that the zero-noise Chamfer term vanishes at ground truth.
  // The ambiguity scene carries no clouds: a Chamfer term against scene
  // structure would re-anchor the depth direction this scene exists to leave
  // free, and the single-view comparison runs without one.
  const int cloud_count = ambiguity ? 0 : spec.global_cloud_points;
  for (int i = 0; i < cloud_count; ++i)
    bundle.global_cloud.points.push_back(
        sample_surface_point(rng, bundle.scene, false));
  for (int v = 0; v < 2; ++v) {
    const SimilarityTransform inv = bundle.true_offsets[v].to_similarity().inverse();
    for (const Vec3& p : bundle.global_cloud.points)
      bundle.views[v].cloud_view.points.push_back(apply_similarity(inv, p));
  }

  // Contact markers from the idle phases.
  for (int frame : motion.contact_frames) {
    const auto& joints = bundle.gt_joints[frame];
    const auto toes = bundle.skeleton.toe_joints();
    const auto feet = bundle.skeleton.foot_joints();
    ContactMarker marker;
    marker.frame = frame;
    const Vec3 mid = 0.5 * (joints[toes[0]] + joints[toes[1]]);
    double min_z = joints[feet[0]].z();
    for (int j : feet) min_z = std::min(min_z, joints[j].z());
    marker.position = Vec3(mid.x(), mid.y(), min_z);
    marker.z = min_z;
    bundle.contacts.markers.push_back(marker);
  }

  // Depth scan keyframes for fusion, gated by accumulated camera translation.
  if (spec.scan_keyframes > 0) {
    const Intrinsics depth_intr(0.6 * spec.depth_width, 0.6 * spec.depth_width,
                                spec.depth_width / 2.0, spec.depth_height / 2.0,
                                spec.depth_width, spec.depth_height);
    const double scan_radius = std::max(1.6, spec.scene.extent - 1.0);
    Vec3 previous_eye = Vec3::Zero();
    int emitted = 0;
    for (int step = 0; step < spec.scan_keyframes * 40 && emitted < spec.scan_keyframes;
         ++step) {
      const double angle = 2.0 * M_PI * step / (spec.scan_keyframes * 40.0);
      const Vec3 eye(scan_radius * std::cos(angle), scan_radius * std::sin(angle), 1.8);
      if (emitted > 0 && (eye - previous_eye).norm() < 0.1) continue;  // keyframe gate
      previous_eye = eye;
      ++emitted;
      const Vec3 target(0.35 * scan_radius * std::cos(angle),
                        0.35 * scan_radius * std::sin(angle), 0.4);
      bundle.scan.push_back(render_depth(bundle.scene, look_at(eye, target), depth_intr,
                                         bundle.scene.scene_class));
    }
  }

  // Joint-pixel depth observations (proxy sensor depths).
  for (int v = 0; v < 2; ++v) {
    for (int t = 0; t < frames; t += 2) {
      const Pose& pose = bundle.views[v].trajectory_scene.frames[t].pose;
      for (int j = 0; j < bundle.skeleton.joint_count(); ++j) {
        if (!(bundle.views[v].keypoints[t].confidences[j] > 0.0)) continue;
        DepthSample s;
        s.view = v;
        s.frame = t;
        s.joint = j;
        s.depth = pose.to_camera(bundle.gt_joints[t][j]).z();
        bundle.depth_samples.push_back(s);
      }
    }
  }

  return bundle;
}

Bundle perturb(const Bundle& bundle, const NoiseSpec& noise, uint64_t seed) {
  Bundle out = bundle;
  Rng rng(seed * 0xBF58476D1CE4E5B9ULL + 0x94D049BB133111EBULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (ViewBundle& view : out.views) {
    for (Keypoint2DFrame& kf : view.keypoints) {
      for (size_t j = 0; j < kf.pixels.size(); ++j) {
        if (kf.confidences[j] > 0.0) {
          kf.pixels[j].x() += gauss(rng, noise.keypoint_sigma_px);
          kf.pixels[j].y() += gauss(rng, noise.keypoint_sigma_px);
          if (noise.dropout > 0.0 && unit(rng) < noise.dropout) kf.confidences[j] = 0.0;
        }
      }
    }
    for (LandmarkObservation& obs : view.landmark_obs) {
      obs.pixel.x() += gauss(rng, noise.landmark_sigma_px);
      obs.pixel.y() += gauss(rng, noise.landmark_sigma_px);
    }
    if (noise.traj_sigma_m > 0.0 || noise.traj_sigma_rad > 0.0) {
      for (TrajectoryFrame& f : view.trajectory_view.frames) {
        f.pose = Pose(axis_angle_to_matrix(gauss3(rng, noise.traj_sigma_rad)) * f.pose.rotation,
                      f.pose.translation + gauss3(rng, noise.traj_sigma_m));
      }
      for (auto& [frame, pose] : view.registered) {
        pose = Pose(axis_angle_to_matrix(gauss3(rng, noise.traj_sigma_rad)) * pose.rotation,
                    pose.translation + gauss3(rng, noise.traj_sigma_m));
      }
    }
    for (Vec3& p : view.cloud_view.points) p += gauss3(rng, noise.cloud_sigma_m);
  }

  for (TrackedCorrespondence& corr : out.tracks) {
    for (int v = 0; v < 2; ++v) {
      corr.pixel[v].x() += gauss(rng, noise.keypoint_sigma_px);
      corr.pixel[v].y() += gauss(rng, noise.keypoint_sigma_px);
      corr.depth[v] *= 1.0 + gauss(rng, noise.depth_sigma_rel);
      if (noise.dropout > 0.0 && unit(rng) < noise.dropout) corr.confidence[v] = 0.0;
    }
  }

  for (Vec3& p : out.global_cloud.points) p += gauss3(rng, noise.cloud_sigma_m);

  if (noise.depth_sigma_rel > 0.0) {
    for (DepthFrame& frame : out.scan)
      for (float& d : frame.depth)
        if (d > 0.0f) d *= static_cast<float>(1.0 + gauss(rng, noise.depth_sigma_rel));
    for (DepthSample& s : out.depth_samples)
      s.depth *= 1.0 + gauss(rng, noise.depth_sigma_rel);
  }

  return out;
}

}  // namespace wfm::synth
