#include "scenerecon/spatial.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

namespace scenerecon {
namespace {

constexpr int kLeafSize = 8;

// Squared distance computed the same way everywhere, so that ties compare
// bit-for-bit between the tree and the brute-force path.
inline double squared_distance(const Points& points, int i, const Vec3& q) {
  const double dx = points(0, i) - q.x();
  const double dy = points(1, i) - q.y();
  const double dz = points(2, i) - q.z();
  return dx * dx + dy * dy + dz * dz;
}

inline double squared_distance_to_box(const Eigen::AlignedBox3d& box, const Vec3& q) {
  double sum = 0.0;
  for (int a = 0; a < 3; ++a) {
    double diff = 0.0;
    if (q(a) < box.min()(a)) {
      diff = box.min()(a) - q(a);
    } else if (q(a) > box.max()(a)) {
      diff = q(a) - box.max()(a);
    }
    sum += diff * diff;
  }
  return sum;
}

struct Candidate {
  double d2;
  int index;
  bool operator<(const Candidate& o) const {
    return d2 < o.d2 || (d2 == o.d2 && index < o.index);
  }
};

void check_k(int k, int n) {
  if (k < 1 || k > n) {
    throw Error("k_nearest: k=" + std::to_string(k) + " outside [1, " +
                std::to_string(n) + "]");
  }
}

}  // namespace

PointIndex::PointIndex(Points points) : points_(std::move(points)) {
  if (points_.cols() == 0) throw Error("PointIndex: cannot build over an empty point set");
  if (!points_.allFinite()) throw Error("PointIndex: points must be finite");
  order_.resize(points_.cols());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * points_.cols() / kLeafSize + 2);
  build(0, static_cast<int>(order_.size()));
}

int PointIndex::build(int begin, int end) {
  Eigen::AlignedBox3d bounds;
  for (int i = begin; i < end; ++i) bounds.extend(points_.col(order_[i]));
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({bounds, begin, end, -1, -1});
  if (end - begin <= kLeafSize) return id;

  int axis = 0;
  bounds.sizes().maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double pa = points_(axis, a), pb = points_(axis, b);
                     return pa < pb || (pa == pb && a < b);
                   });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

Neighbor PointIndex::nearest(const Vec3& query) const {
  Candidate best{std::numeric_limits<double>::infinity(), -1};
  // Explicit stack; children are visited nearest-box first. Depth is
  // logarithmic, so a fixed array suffices.
  std::array<int, 128> stack;
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (squared_distance_to_box(node.bounds, query) > best.d2) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const Candidate c{squared_distance(points_, order_[i], query), order_[i]};
        if (c < best) best = c;
      }
      continue;
    }
    const double dl = squared_distance_to_box(nodes_[node.left].bounds, query);
    const double dr = squared_distance_to_box(nodes_[node.right].bounds, query);
    if (dl <= dr) {
      stack[top++] = node.right;
      stack[top++] = node.left;
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  return {best.index, std::sqrt(best.d2)};
}

std::vector<Neighbor> PointIndex::k_nearest(const Vec3& query, int k) const {
  check_k(k, size());
  std::priority_queue<Candidate> heap;  // worst candidate on top
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (static_cast<int>(heap.size()) == k &&
        squared_distance_to_box(node.bounds, query) > heap.top().d2) {
      continue;
    }
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const Candidate c{squared_distance(points_, order_[i], query), order_[i]};
        if (static_cast<int>(heap.size()) < k) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      continue;
    }
    const double dl = squared_distance_to_box(nodes_[node.left].bounds, query);
    const double dr = squared_distance_to_box(nodes_[node.right].bounds, query);
    if (dl <= dr) {
      stack.push_back(node.right);
      stack.push_back(node.left);
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  std::vector<Neighbor> out(heap.size());
  for (auto it = out.rbegin(); it != out.rend(); ++it) {
    *it = {heap.top().index, std::sqrt(heap.top().d2)};
    heap.pop();
  }
  return out;
}

Neighbor brute_force_nearest(const Points& points, const Vec3& query) {
  if (points.cols() == 0) throw Error("brute_force_nearest: empty point set");
  Candidate best{std::numeric_limits<double>::infinity(), -1};
  for (int i = 0; i < points.cols(); ++i) {
    const Candidate c{squared_distance(points, i, query), i};
    if (c < best) best = c;
  }
  return {best.index, std::sqrt(best.d2)};
}

std::vector<Neighbor> brute_force_k_nearest(const Points& points, const Vec3& query,
                                            int k) {
  check_k(k, static_cast<int>(points.cols()));
  std::vector<Candidate> all(points.cols());
  for (int i = 0; i < points.cols(); ++i) all[i] = {squared_distance(points, i, query), i};
  std::partial_sort(all.begin(), all.begin() + k, all.end());
  std::vector<Neighbor> out(k);
  for (int i = 0; i < k; ++i) out[i] = {all[i].index, std::sqrt(all[i].d2)};
  return out;
}

}  // namespace scenerecon
