#pragma once

#include <cstddef>
#include <vector>

#include "layerfuse/geometry.hpp"

namespace layerfuse {

/// Static 3-D kd-tree for exact nearest-neighbor queries. Splits on the axis of
/// largest extent at the median; leaves hold up to 8 points.
class KdTree {
 public:
  explicit KdTree(std::vector<Vec3> points);

  std::size_t size() const { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  struct Hit {
    std::size_t index = 0;
    double dist2 = 0.0;
  };
  /// Nearest point; among equidistant points the lowest index wins.
  Hit nearest(const Vec3& q) const;

 private:
  struct Node {
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    int left = -1;
    int right = -1;
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  int build(std::size_t begin, std::size_t end);
  void search(int node, const Vec3& q, Hit& best) const;

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

/// Distance from each query to its nearest point in the tree (parallel, thread-count independent).
std::vector<double> nearest_distances(const KdTree& tree, const std::vector<Vec3>& queries);

}  // namespace layerfuse
