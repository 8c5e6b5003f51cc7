#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace primht {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Points3 = Eigen::Matrix3Xd;  // one column per point
using Index = Eigen::Index;

/// Thrown when an input file or argument violates a precondition.
struct InvalidInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when no reliable normal contributes a direction vote.
struct NoDominantDirection : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when a dense accumulator would exceed the configured cell budget.
struct CapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Axis-aligned bounding box.
struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  bool empty() const { return (hi.array() < lo.array()).any(); }
  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 sides() const { return hi - lo; }
  double diagonal() const { return empty() ? 0.0 : (hi - lo).norm(); }

  void extend(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }

  static Aabb of(const Points3& pts) {
    Aabb box;
    if (pts.cols() > 0) {
      box.lo = pts.rowwise().minCoeff();
      box.hi = pts.rowwise().maxCoeff();
    }
    return box;
  }
};

/// Orientation-preserving similarity p -> scale * R * p + t.
struct SimilarityTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  /// Apply to a single point (3-vector) or a whole 3xN batch.
  template <typename Derived>
  auto apply(const Eigen::MatrixBase<Derived>& p) const {
    if constexpr (Derived::ColsAtCompileTime == 1) {
      return Vec3(scale * (rotation * p) + translation);
    } else {
      return Points3((scale * (rotation * p)).colwise() + translation);
    }
  }

  /// Rotate a direction (no translation, no scale).
  Vec3 apply_direction(const Vec3& d) const { return rotation * d; }

  SimilarityTransform inverse() const {
    SimilarityTransform inv;
    inv.rotation = rotation.transpose();
    inv.scale = 1.0 / scale;
    inv.translation = -inv.scale * (inv.rotation * translation);
    return inv;
  }

  /// Composition: (this * other).apply(p) == this->apply(other.apply(p)).
  SimilarityTransform operator*(const SimilarityTransform& other) const {
    SimilarityTransform out;
    out.rotation = rotation * other.rotation;
    out.scale = scale * other.scale;
    out.translation = scale * (rotation * other.translation) + translation;
    return out;
  }

  /// Row-major 4x4 homogeneous matrix [s*R | t; 0 0 0 1].
  std::array<double, 16> to_row_major() const {
    std::array<double, 16> m{};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m[4 * r + c] = scale * rotation(r, c);
      m[4 * r + 3] = translation(r);
    }
    m[15] = 1.0;
    return m;
  }

  static SimilarityTransform from_row_major(const std::array<double, 16>& m) {
    Mat3 a;
    SimilarityTransform t;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) a(r, c) = m[4 * r + c];
      t.translation(r) = m[4 * r + 3];
    }
    double det = a.determinant();
    t.scale = std::cbrt(det);
    t.rotation = a / t.scale;
    return t;
  }

  static SimilarityTransform translate(const Vec3& t) {
    SimilarityTransform out;
    out.translation = t;
    return out;
  }

  static SimilarityTransform rotate(const Mat3& r) {
    SimilarityTransform out;
    out.rotation = r;
    return out;
  }

  static SimilarityTransform scaling(double s) {
    SimilarityTransform out;
    out.scale = s;
    return out;
  }
};

/// Provenance stack of recorded transforms.  Each entry maps the coordinates
/// of the stage it was recorded at *back* to the coordinates of the previous
/// stage, so composing the stack front-to-back maps the final (most processed)
/// frame back to the original input frame.
struct TransformStack {
  std::vector<SimilarityTransform> stack;

  void push(const SimilarityTransform& t) { stack.push_back(t); }

  /// Transform mapping the current frame back to the original frame.
  SimilarityTransform to_original() const {
    SimilarityTransform t;
    for (const auto& s : stack) t = t * s;
    return t;
  }

  /// Transform mapping the original frame into the current frame.
  SimilarityTransform from_original() const { return to_original().inverse(); }
};

/// Point cloud with optional per-point unit normals.
struct PointCloud {
  Points3 points;
  Points3 normals;                            // 3 x size() when present, else 3 x 0
  std::vector<std::uint8_t> normal_reliable;  // parallel to normals when present
  std::string id;

  Index size() const { return points.cols(); }
  bool has_normals() const { return normals.cols() == points.cols() && points.cols() > 0; }
  Aabb bounds() const { return Aabb::of(points); }

  /// Sub-cloud with the given point indices (normals carried along).
  PointCloud subset(const std::vector<Index>& idx) const {
    PointCloud out;
    out.id = id;
    out.points.resize(3, static_cast<Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out.points.col(static_cast<Index>(i)) = points.col(idx[i]);
    if (has_normals()) {
      out.normals.resize(3, static_cast<Index>(idx.size()));
      out.normal_reliable.resize(idx.size(), 1);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        out.normals.col(static_cast<Index>(i)) = normals.col(idx[i]);
        out.normal_reliable[i] = normal_reliable.empty() ? 1 : normal_reliable[static_cast<std::size_t>(idx[i])];
      }
    }
    return out;
  }
};

}  // namespace primht
