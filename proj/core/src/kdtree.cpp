#include "wfm/kdtree.hpp"

#include <algorithm>
#include <limits>

namespace wfm {

KdTree3::KdTree3(const std::vector<Vec3>& points) : points_(points) {
  order_.resize(points_.size());
  for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  if (!points_.empty()) root_ = build(0, static_cast<int>(points_.size()));
}

int KdTree3::build(int begin, int end) {
  Node node;
  node.begin = begin;
  node.end = end;
  if (end - begin <= kLeafSize) {
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }

  Vec3 lo = points_[order_[begin]], hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  node.axis = axis;

  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     if (points_[a][axis] != points_[b][axis])
                       return points_[a][axis] < points_[b][axis];
                     return a < b;
                   });
  node.split = points_[order_[mid]][axis];

  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

int KdTree3::nearest(const Vec3& query, double* squared_distance, int exclude) const {
  if (points_.empty() || (points_.size() == 1 && exclude == 0))
    throw EmptyCloud("nearest() without candidates");
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  search(root_, query, exclude, best, best_d2);
  if (squared_distance) *squared_distance = best_d2;
  return best;
}

std::vector<double> KdTree3::nearest_k(const Vec3& query, int k, int exclude) const {
  std::vector<double> heap;  // max-heap of the k best squared distances
  if (k <= 0 || points_.empty()) return heap;
  heap.reserve(k);
  search_k(root_, query, exclude, k, heap);
  std::sort_heap(heap.begin(), heap.end());
  return heap;
}

void KdTree3::search_k(int node_id, const Vec3& q, int exclude, int k,
                       std::vector<double>& heap) const {
  const Node& node = nodes_[node_id];
  if (node.left < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[i];
      if (idx == exclude) continue;
      const double d2 = (points_[idx] - q).squaredNorm();
      if (static_cast<int>(heap.size()) < k) {
        heap.push_back(d2);
        std::push_heap(heap.begin(), heap.end());
      } else if (d2 < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = d2;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }
  const double delta = q[node.axis] - node.split;
  const int near = delta < 0.0 ? node.left : node.right;
  const int far = delta < 0.0 ? node.right : node.left;
  search_k(near, q, exclude, k, heap);
  if (static_cast<int>(heap.size()) < k || delta * delta <= heap.front())
    search_k(far, q, exclude, k, heap);
}

void KdTree3::search(int node_id, const Vec3& q, int exclude, int& best,
                     double& best_d2) const {
  const Node& node = nodes_[node_id];
  if (node.left < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[i];
      if (idx == exclude) continue;
      const double d2 = (points_[idx] - q).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
        best_d2 = d2;
        best = idx;
      }
    }
    return;
  }
  const double delta = q[node.axis] - node.split;
  const int near = delta < 0.0 ? node.left : node.right;
  const int far = delta < 0.0 ? node.right : node.left;
  search(near, q, exclude, best, best_d2);
  if (delta * delta <= best_d2) search(far, q, exclude, best, best_d2);
}

}  // namespace wfm
