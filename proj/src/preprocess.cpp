#include "primht/preprocess.hpp"

namespace primht {

TransformedCloud barycenter_center(const PointCloud& cloud) {
  if (cloud.size() == 0) throw InvalidInput("barycenter_center: empty cloud");
  const Vec3 mean = cloud.points.rowwise().mean();
  TransformedCloud out;
  out.cloud = cloud;
  out.cloud.points.colwise() -= mean;
  out.back = SimilarityTransform::translate(mean);
  return out;
}

TransformedCloud align_direction_to_z(const PointCloud& cloud, const Vec3& direction) {
  if (cloud.size() == 0) throw InvalidInput("align_direction_to_z: empty cloud");
  if (direction.norm() == 0.0) throw InvalidInput("align_direction_to_z: zero direction");
  const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(direction, Vec3::UnitZ());
  const Mat3 rot = q.toRotationMatrix();
  TransformedCloud out;
  out.cloud = cloud;
  out.cloud.points = rot * cloud.points;
  if (cloud.has_normals()) out.cloud.normals = rot * cloud.normals;
  out.back = SimilarityTransform::rotate(rot.transpose());
  return out;
}

TransformedCloud scale_to_unit_cube(const PointCloud& cloud) {
  if (cloud.size() == 0) throw InvalidInput("scale_to_unit_cube: empty cloud");
  const Aabb box = cloud.bounds();
  const double longest = box.sides().maxCoeff();
  const double s = longest > 0.0 ? 1.0 / longest : 1.0;
  const Vec3 c = box.center();
  TransformedCloud out;
  out.cloud = cloud;
  out.cloud.points = (s * (cloud.points.colwise() - c)).eval();
  // back: p_in = (1/s) * p_out + c
  out.back.scale = 1.0 / s;
  out.back.translation = c;
  return out;
}

}  // namespace primht
