#pragma once

#include "primht/family.hpp"

namespace primht {

struct DistanceResult {
  double distance = 0.0;
  bool approximate = false;  // true when an iterative projection did not converge
};

/// Euclidean distance from a point (given in the instance's outer frame) to
/// the posed surface.  Plane, sphere, cylinder, cone and torus use closed
/// forms; the remaining families project via seeded Gauss-Newton (max 50
/// iterations, relative tolerance 1e-8).
DistanceResult distance_ex(const PrimitiveInstance& instance, const Vec3& point);

inline double distance(const PrimitiveInstance& instance, const Vec3& point) {
  return distance_ex(instance, point).distance;
}

/// Distances for a batch of points (optionally multithreaded).
Eigen::VectorXd distances(const PrimitiveInstance& instance, const Points3& points,
                          int workers = 1);

}  // namespace primht
