#pragma once

#include <vector>

#include <Eigen/Geometry>

#include "scenerecon/common.hpp"

namespace scenerecon {

struct Neighbor {
  int index{-1};
  double distance{0};
};

// Exact nearest-neighbor index over a fixed 3D point set.
//
// Results are identical to brute force, including ties: among points at the
// same squared distance the lowest index wins. The index is immutable after
// construction and safe to query from several threads. Empty or non-finite
// point sets are rejected.
class PointIndex {
 public:
  explicit PointIndex(Points points);

  Neighbor nearest(const Vec3& query) const;

  // The k closest points, ascending by distance then index.
  std::vector<Neighbor> k_nearest(const Vec3& query, int k) const;

  const Points& points() const { return points_; }
  int size() const { return static_cast<int>(points_.cols()); }

 private:
  struct Node {
    Eigen::AlignedBox3d bounds;
    int begin{0};
    int end{0};
    int left{-1};
    int right{-1};
  };

  int build(int begin, int end);

  Points points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

// O(n) reference implementations used to validate PointIndex.
Neighbor brute_force_nearest(const Points& points, const Vec3& query);
std::vector<Neighbor> brute_force_k_nearest(const Points& points, const Vec3& query,
                                            int k);

}  // namespace scenerecon
