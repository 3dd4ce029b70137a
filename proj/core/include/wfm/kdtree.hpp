#pragma once

#include <vector>

#include "wfm/geometry.hpp"

namespace wfm {

/// Exact nearest-neighbor search over a fixed 3D point set.
///
/// Pruning only discards points that cannot beat the current best squared
/// distance, so query results match a linear scan bit-for-bit; ties are broken
/// toward the smallest point index.
class KdTree3 {
 public:
  explicit KdTree3(const std::vector<Vec3>& points);

  /// Index of the nearest point; optionally outputs the squared distance.
  /// `exclude` skips one point index (for self queries). Throws EmptyCloud
  /// when no candidate exists.
  int nearest(const Vec3& query, double* squared_distance = nullptr,
              int exclude = -1) const;

  /// Squared distances to the k nearest points (ascending), self-exclusion
  /// as above. Returns fewer when the set is smaller.
  std::vector<double> nearest_k(const Vec3& query, int k, int exclude = -1) const;

  size_t size() const { return points_.size(); }

 private:
  struct Node {
    int left = -1, right = -1;  // children, -1 for leaf
    int begin = 0, end = 0;     // leaf range into order_
    int axis = 0;
    double split = 0.0;
  };

  int build(int begin, int end);
  void search(int node, const Vec3& q, int exclude, int& best, double& best_d2) const;
  void search_k(int node, const Vec3& q, int exclude, int k,
                std::vector<double>& heap) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
  static constexpr int kLeafSize = 8;
};

}  // namespace wfm
