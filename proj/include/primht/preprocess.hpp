#pragma once

#include "primht/core.hpp"

namespace primht {

/// Result of one in-place preprocessing step: the transformed cloud plus the
/// transform that maps the *output* coordinates back to the *input* ones.
struct TransformedCloud {
  PointCloud cloud;
  SimilarityTransform back;  // output frame -> input frame
};

/// Translate the barycenter to the origin.
TransformedCloud barycenter_center(const PointCloud& cloud);

/// Apply the minimal-angle rotation taking `direction` onto +z.  Normals, if
/// present, are rotated along with the points.
TransformedCloud align_direction_to_z(const PointCloud& cloud, const Vec3& direction);

/// Center the bounding box on the origin and isotropically scale the cloud so
/// its box fits inside [-0.5, 0.5]^3 with longest side 1.
TransformedCloud scale_to_unit_cube(const PointCloud& cloud);

}  // namespace primht
