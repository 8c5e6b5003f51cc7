#pragma once

#include "primht/core.hpp"

namespace primht {

/// Unit directions used as angular bins for normal voting: the vertices of a
/// level-3 subdivided icosahedron (642 directions, ~5 degree bin radius),
/// grouped into antipodal pairs so that n and -n always vote the same bin.
struct DirectionBins {
  Points3 centers;              // all sphere directions, unit length
  std::vector<int> canonical;   // centers column -> canonical pair id
  Points3 representatives;      // one direction per pair (z >= 0 hemisphere)

  static const DirectionBins& level3();
};

/// Estimate per-point unit normals by PCA over the k nearest neighbours
/// (query point included).  A normal is flagged unreliable when the two
/// smallest covariance eigenvalues are comparable (ratio > 0.9) or the
/// neighbourhood is degenerate.
///
/// Preconditions: k >= 3 and cloud.size() >= k.
PointCloud estimate_normals(const PointCloud& cloud, int k, int workers = 1);

/// Most voted normal direction over the antipodal direction bins.  Ties are
/// broken by lowest bin index.  Throws NoDominantDirection when the cloud has
/// no reliable normals.
Vec3 dominant_normal_direction(const PointCloud& cloud);

}  // namespace primht
