#pragma once

#include "primht/core.hpp"

namespace primht {

/// Exact nearest-neighbour index over a fixed set of points (kd-tree).
///
/// Ties in distance are broken by ascending point index, so query results are
/// fully deterministic and match a brute-force scan ordered by
/// (distance, index).
class KnnIndex {
 public:
  explicit KnnIndex(const Points3& points);

  struct Neighbor {
    Index index;
    double distance;
  };

  /// The k nearest points to `query` (k is clamped to the index size),
  /// ordered by (distance, index).
  std::vector<Neighbor> knn(const Vec3& query, int k) const;

  /// All points within `radius` of `query` (inclusive), ordered by index.
  std::vector<Index> radius(const Vec3& query, double radius) const;

  Index size() const { return points_.cols(); }

 private:
  struct Node {
    // Leaf when axis < 0; [begin, end) indexes into order_.
    int axis = -1;
    double split = 0.0;
    Index begin = 0, end = 0;
    int left = -1, right = -1;
  };

  int build(Index begin, Index end, int depth);

  Points3 points_;
  std::vector<Index> order_;  // permutation of point indices, partitioned by the tree
  std::vector<Node> nodes_;
  int root_ = -1;
};

/// Convenience one-shot query: builds a temporary index.
std::vector<KnnIndex::Neighbor> knn_query(const PointCloud& cloud, const Vec3& query, int k);

/// Mean distance to the k-th nearest neighbour over a deterministic sample of
/// at most `max_sample` points (stride-sampled). Used for density gates.
double mean_knn_spacing(const Points3& points, int k, Index max_sample = 2000);

}  // namespace primht
