#pragma once

#include <array>
#include <vector>

#include "wfm/geometry.hpp"

namespace wfm {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  bool empty() const { return faces.empty(); }
};

struct MeshTopology {
  int vertex_count = 0;
  int edge_count = 0;
  int face_count = 0;
  int component_count = 0;
  int euler_characteristic() const { return vertex_count - edge_count + face_count; }
};

MeshTopology analyze_topology(const TriangleMesh& mesh);

/// Connected-component label per face (labels are 0-based, deterministic).
std::vector<int> face_components(const TriangleMesh& mesh, int* component_count = nullptr);

/// Drops faces whose component is smaller than `fraction` of the largest one,
/// then removes statistical outlier vertices (1-NN distance beyond
/// mean + sigma·stddev) with their incident faces; unreferenced vertices are
/// compacted away.
TriangleMesh clean_mesh(const TriangleMesh& mesh, double min_component_fraction = 0.1,
                        double outlier_sigma = 3.0);

}  // namespace wfm
