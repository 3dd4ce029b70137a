#pragma once

#include <vector>

#include "wfm/geometry.hpp"
#include "wfm/mesh.hpp"

namespace wfm {

enum class SceneClass { kIndoor, kOutdoor };

/// Sensor-range depth cutoff: 3.5 m indoor, 5.0 m outdoor.
double depth_truncation_threshold(SceneClass scene_class);

/// One depth raster with its camera. Depths are meters, 0 marks invalid
/// pixels; values beyond the scene-class threshold are zeroed on ingestion.
struct DepthFrame {
  int width = 0, height = 0;
  std::vector<float> depth;  // row-major, height*width
  Pose pose;
  Intrinsics intrinsics;
  SceneClass scene_class = SceneClass::kIndoor;

  static DepthFrame make(std::vector<float> depth_meters, int width, int height,
                         const Pose& pose, const Intrinsics& intrinsics,
                         SceneClass scene_class);

  float at(int x, int y) const { return depth[static_cast<size_t>(y) * width + x]; }
};

/// Truncated signed distance volume fused from depth frames by weighted
/// running average. SDF values are meters clamped to ±truncation margin;
/// voxels farther than the margin behind an observed surface stay untouched.
class TsdfVolume {
 public:
  TsdfVolume(const Vec3& origin, double voxel_size, const Eigen::Vector3i& dims,
             double truncation_margin);

  void integrate(const DepthFrame& frame);

  /// Zero level set as a triangle mesh (marching tetrahedra over observed
  /// cells). Throws EmptySurface when no sign change exists.
  TriangleMesh extract_mesh() const;

  Vec3 voxel_center(int ix, int iy, int iz) const;
  double sdf_at(int ix, int iy, int iz) const { return sdf_[index(ix, iy, iz)]; }
  double weight_at(int ix, int iy, int iz) const { return weight_[index(ix, iy, iz)]; }
  void set_sdf(int ix, int iy, int iz, double sdf, double weight);

  const Eigen::Vector3i& dims() const { return dims_; }
  double voxel_size() const { return voxel_size_; }
  double truncation_margin() const { return margin_; }

 private:
  size_t index(int ix, int iy, int iz) const {
    return (static_cast<size_t>(iz) * dims_.y() + iy) * dims_.x() + ix;
  }

  Vec3 origin_;
  double voxel_size_;
  Eigen::Vector3i dims_;
  double margin_;
  std::vector<double> sdf_;
  std::vector<double> weight_;
};

}  // namespace wfm
