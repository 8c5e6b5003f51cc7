#pragma once

#include "primht/core.hpp"

namespace primht {

/// Labels from density-based clustering: cluster id >= 0 per point, or -1 for
/// noise.  Core points have at least min_pts neighbours (self included)
/// within radius.  Points are processed in index order and border points join
/// the first core cluster that reaches them, which makes the labelling fully
/// deterministic.
std::vector<int> dbscan(const Points3& points, double radius, int min_pts);

/// Point index lists per cluster (ascending indices, clusters by id).
std::vector<std::vector<Index>> dbscan_clusters(const Points3& points, double radius, int min_pts);

}  // namespace primht
