#include "wfm/fusion.hpp"

#include "wfm/parallel.hpp"

#include <cmath>
#include <unordered_map>

namespace wfm {

double depth_truncation_threshold(SceneClass scene_class) {
  return scene_class == SceneClass::kIndoor ? 3.5 : 5.0;
}

DepthFrame DepthFrame::make(std::vector<float> depth_meters, int width, int height,
                            const Pose& pose, const Intrinsics& intrinsics,
                            SceneClass scene_class) {
  if (static_cast<int>(depth_meters.size()) != width * height)
    throw SizeMismatch("depth buffer size does not match dimensions");
  DepthFrame f;
  f.width = width;
  f.height = height;
  f.pose = pose;
  f.intrinsics = intrinsics;
  f.scene_class = scene_class;
  const float cutoff = static_cast<float>(depth_truncation_threshold(scene_class));
  for (float& d : depth_meters) {
    if (!(d > 0.0f) || d > cutoff) d = 0.0f;
  }
  f.depth = std::move(depth_meters);
  return f;
}

TsdfVolume::TsdfVolume(const Vec3& origin, double voxel_size,
                       const Eigen::Vector3i& dims, double truncation_margin)
    : origin_(origin), voxel_size_(voxel_size), dims_(dims), margin_(truncation_margin) {
  if (!(voxel_size > 0.0) || !(truncation_margin > 0.0))
    throw InvalidArgument("voxel size and truncation margin must be positive");
  if (dims.minCoeff() < 2) throw InvalidArgument("volume needs >= 2 voxels per axis");
  const size_t n = static_cast<size_t>(dims.x()) * dims.y() * dims.z();
  sdf_.assign(n, 0.0);
  weight_.assign(n, 0.0);
}

Vec3 TsdfVolume::voxel_center(int ix, int iy, int iz) const {
  return origin_ + voxel_size_ * Vec3(ix + 0.5, iy + 0.5, iz + 0.5);
}

void TsdfVolume::set_sdf(int ix, int iy, int iz, double sdf, double weight) {
  const size_t i = index(ix, iy, iz);
  sdf_[i] = std::clamp(sdf, -margin_, margin_);
  weight_[i] = weight;
}

void TsdfVolume::integrate(const DepthFrame& frame) {
  // Pixels adjacent to a depth discontinuity carve false space along grazing
  // rays (tunnels at sharp object edges); mark and skip them.
  std::vector<uint8_t> reliable(frame.depth.size(), 0);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      const double d = frame.at(x, y);
      if (!(d > 0.0)) continue;
      bool ok = true;
      for (int dy = -1; dy <= 1 && ok; ++dy) {
        for (int dx = -1; dx <= 1 && ok; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || nx >= frame.width || ny < 0 || ny >= frame.height) continue;
          const double dn = frame.at(nx, ny);
          if (!(dn > 0.0) || std::abs(dn - d) > margin_) ok = false;
        }
      }
      reliable[static_cast<size_t>(y) * frame.width + x] = ok ? 1 : 0;
    }
  }

  // Voxels update independently, so z-slabs can run in parallel without
  // changing the result.
  parallel_for(dims_.z(), [&](int iz) {
    for (int iy = 0; iy < dims_.y(); ++iy) {
      for (int ix = 0; ix < dims_.x(); ++ix) {
        const Vec3 p_cam = frame.pose.to_camera(voxel_center(ix, iy, iz));
        if (!(p_cam.z() > 1e-9)) continue;
        const double u = frame.intrinsics.fx * p_cam.x() / p_cam.z() + frame.intrinsics.cx;
        const double v = frame.intrinsics.fy * p_cam.y() / p_cam.z() + frame.intrinsics.cy;
        const int px = static_cast<int>(std::floor(u));
        const int py = static_cast<int>(std::floor(v));
        if (px < 0 || px >= frame.width || py < 0 || py >= frame.height) continue;
        if (!reliable[static_cast<size_t>(py) * frame.width + px]) continue;
        const double d = frame.at(px, py);
        const double sdf = d - p_cam.z();
        if (sdf < -margin_) continue;  // far behind the surface: unobserved
        const double clamped = std::min(sdf, margin_);
        const size_t i = index(ix, iy, iz);
        const double w_old = weight_[i];
        sdf_[i] = (w_old * sdf_[i] + clamped) / (w_old + 1.0);
        weight_[i] = w_old + 1.0;
      }
    }
  });
}

namespace {

// Corner bit layout: bit0 = +x, bit1 = +y, bit2 = +z.
// Six tetrahedra share the main diagonal corner0-corner7; every cube face is
// split along the diagonal through corner 0 or 7, so neighboring cells agree
// and the extracted surface is crack-free.
constexpr int kTets[6][4] = {
    {0, 1, 3, 7}, {0, 3, 2, 7}, {0, 2, 6, 7},
    {0, 6, 4, 7}, {0, 4, 5, 7}, {0, 5, 1, 7},
};

struct Extractor {
  const TsdfVolume& vol;
  TriangleMesh mesh;
  std::unordered_map<uint64_t, int> edge_vertex;

  std::array<double, 8> corner_sdf{};
  std::array<bool, 8> corner_valid{};
  std::array<Vec3, 8> corner_pos{};
  std::array<uint64_t, 8> corner_id{};

  explicit Extractor(const TsdfVolume& v) : vol(v) {}

  int edge_point(int a, int b) {
    uint64_t ka = corner_id[a], kb = corner_id[b];
    if (ka > kb) {
      std::swap(ka, kb);
      std::swap(a, b);
    }
    return emit((ka << 32) | kb, a, b);
  }

  int emit(uint64_t key, int a, int b) {
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;
    const double sa = corner_sdf[a], sb = corner_sdf[b];
    const double t = sa / (sa - sb);
    const Vec3 p = corner_pos[a] + t * (corner_pos[b] - corner_pos[a]);
    const int idx = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(p);
    edge_vertex.emplace(key, idx);
    return idx;
  }

  void add_triangle(int v0, int v1, int v2, const Vec3& outward) {
    if (v0 == v1 || v1 == v2 || v0 == v2) return;
    const Vec3 n = (mesh.vertices[v1] - mesh.vertices[v0])
                       .cross(mesh.vertices[v2] - mesh.vertices[v0]);
    if (n.dot(outward) < 0.0)
      mesh.faces.push_back({v0, v2, v1});
    else
      mesh.faces.push_back({v0, v1, v2});
  }

  void process_tet(const int t[4]) {
    int neg[4], pos[4];
    int n_neg = 0, n_pos = 0;
    for (int i = 0; i < 4; ++i) {
      if (corner_sdf[t[i]] < 0.0)
        neg[n_neg++] = t[i];
      else
        pos[n_pos++] = t[i];
    }
    if (n_neg == 0 || n_pos == 0) return;

    // Direction from the inside corners toward the outside corners orients
    // triangles with outward normals.
    Vec3 inside = Vec3::Zero(), outside = Vec3::Zero();
    for (int i = 0; i < n_neg; ++i) inside += corner_pos[neg[i]];
    for (int i = 0; i < n_pos; ++i) outside += corner_pos[pos[i]];
    const Vec3 outward = outside / n_pos - inside / n_neg;

    if (n_neg == 1) {
      const int a = edge_point(neg[0], pos[0]);
      const int b = edge_point(neg[0], pos[1]);
      const int c = edge_point(neg[0], pos[2]);
      add_triangle(a, b, c, outward);
    } else if (n_neg == 3) {
      const int a = edge_point(neg[0], pos[0]);
      const int b = edge_point(neg[1], pos[0]);
      const int c = edge_point(neg[2], pos[0]);
      add_triangle(a, b, c, outward);
    } else {
      const int ac = edge_point(neg[0], pos[0]);
      const int ad = edge_point(neg[0], pos[1]);
      const int bc = edge_point(neg[1], pos[0]);
      const int bd = edge_point(neg[1], pos[1]);
      add_triangle(ac, ad, bd, outward);
      add_triangle(ac, bd, bc, outward);
    }
  }
};

}  // namespace

TriangleMesh TsdfVolume::extract_mesh() const {
  Extractor ex(*this);
  const Eigen::Vector3i d = dims_;
  for (int iz = 0; iz + 1 < d.z(); ++iz) {
    for (int iy = 0; iy + 1 < d.y(); ++iy) {
      for (int ix = 0; ix + 1 < d.x(); ++ix) {
        bool all_observed = true;
        for (int c = 0; c < 8 && all_observed; ++c) {
          const int cx = ix + (c & 1), cy = iy + ((c >> 1) & 1), cz = iz + ((c >> 2) & 1);
          if (weight_[index(cx, cy, cz)] <= 0.0) all_observed = false;
          ex.corner_sdf[c] = sdf_[index(cx, cy, cz)];
          ex.corner_pos[c] = voxel_center(cx, cy, cz);
          ex.corner_id[c] = index(cx, cy, cz);
        }
        if (!all_observed) continue;
        for (const auto& tet : kTets) ex.process_tet(tet);
      }
    }
  }
  if (ex.mesh.faces.empty()) throw EmptySurface("volume contains no zero crossing");
  return ex.mesh;
}

}  // namespace wfm
