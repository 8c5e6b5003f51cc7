#include "primht/pipeline.hpp"

#include "primht/normals.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace primht {
namespace {

/// Orthonormal basis completing a unit vector `a` to a right-handed frame.
void tangent_basis(const Vec3& a, Vec3& e1, Vec3& e2) {
  Vec3 helper = std::abs(a.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  e1 = a.cross(helper).normalized();
  e2 = a.cross(e1);
}

struct ConcurrenceFit {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double residual = std::numeric_limits<double>::infinity();  // weighted RMS distance
  bool ok = false;
};

/// Least-squares concurrence point of the projected normal lines for a trial
/// axis direction.  Each point contributes the 2-D line through its projection
/// along its projected normal; the weight grows with the projected normal
/// length, so normals parallel to the axis fade out smoothly.
ConcurrenceFit axis_concurrence(const Points3& pts, const Points3& nrm,
                                const std::vector<char>& reliable, const Vec3& a) {
  Vec3 e1, e2;
  tangent_basis(a, e1, e2);
  Eigen::Matrix2d lhs = Eigen::Matrix2d::Zero();
  Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
  double weight_sum = 0.0;
  const Index n = pts.cols();
  for (Index i = 0; i < n; ++i) {
    if (!reliable[static_cast<std::size_t>(i)]) continue;
    const Vec3 p = pts.col(i);
    const Vec3 nv = nrm.col(i);
    const Eigen::Vector2d p2(p.dot(e1), p.dot(e2));
    const Eigen::Vector2d n2(nv.dot(e1), nv.dot(e2));
    const Eigen::Vector2d m(-n2.y(), n2.x());  // line normal, length = |n2|
    lhs += m * m.transpose();
    rhs += m * m.dot(p2);
    weight_sum += m.squaredNorm();
  }
  ConcurrenceFit fit;
  if (weight_sum < 1e-12) return fit;
  const Eigen::Matrix2d reg = 1e-12 * weight_sum * Eigen::Matrix2d::Identity();
  fit.center = (lhs + reg).ldlt().solve(rhs);
  double err = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (!reliable[static_cast<std::size_t>(i)]) continue;
    const Vec3 p = pts.col(i);
    const Vec3 nv = nrm.col(i);
    const Eigen::Vector2d p2(p.dot(e1), p.dot(e2));
    const Eigen::Vector2d n2(nv.dot(e1), nv.dot(e2));
    const Eigen::Vector2d m(-n2.y(), n2.x());
    const double off = m.dot(fit.center - p2);
    err += off * off;
  }
  fit.residual = std::sqrt(err / weight_sum);
  fit.ok = true;
  return fit;
}

/// Median axis coordinate of the closest approach between each normal line
/// and the candidate axis.  Points whose normals are nearly parallel to the
/// axis are skipped (ill-conditioned intersections).
double axis_anchor(const Points3& pts, const Points3& nrm, const std::vector<char>& reliable,
                   const Vec3& a, const Eigen::Vector2d& c2) {
  Vec3 e1, e2;
  tangent_basis(a, e1, e2);
  const Vec3 c0 = c2.x() * e1 + c2.y() * e2;
  std::vector<double> coords;
  const Index n = pts.cols();
  coords.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    if (!reliable[static_cast<std::size_t>(i)]) continue;
    const Vec3 p = pts.col(i);
    const Vec3 nv = nrm.col(i);
    const double axial = nv.dot(a);
    if (std::abs(axial) > 0.98) continue;
    // Closest approach between the axis c0 + s a and the line p + t nv.
    const Vec3 w = p - c0;
    const double b = a.dot(nv);
    const double d = a.dot(w);
    const double e = nv.dot(w);
    const double denom = 1.0 - b * b;
    if (denom < 1e-6) {
      coords.push_back(d);  // parallel lines: project the point instead
      continue;
    }
    coords.push_back((d - b * e) / denom);
  }
  if (coords.empty()) return 0.0;
  const std::size_t mid = coords.size() / 2;
  std::nth_element(coords.begin(), coords.begin() + static_cast<std::ptrdiff_t>(mid),
                   coords.end());
  double med = coords[mid];
  if (coords.size() % 2 == 0) {
    const double lower =
        *std::max_element(coords.begin(), coords.begin() + static_cast<std::ptrdiff_t>(mid));
    med = 0.5 * (med + lower);
  }
  return med;
}

/// Axial anchor from the meridian-plane concurrence.  In (radial distance,
/// axial coordinate) coordinates the normal lines of a rotational surface
/// pass through the profile's centre of curvature.  For tube-like profiles
/// the normal directions sweep the full meridian plane and the least-squares
/// intersection pins the axial origin sharply, whereas the per-line axis
/// crossings used by `axis_anchor` are heavy-tailed (their spread scales with
/// the ring radius).  Profiles whose normals stay nearly parallel in the
/// meridian plane (cylinders, cones) leave the system ill-conditioned; the
/// caller then falls back to the median crossing, which their standard forms
/// tolerate because they carry an explicit axial offset parameter.
std::optional<double> meridian_anchor(const Points3& pts, const Points3& nrm,
                                      const std::vector<char>& reliable, const Vec3& a,
                                      const Eigen::Vector2d& c2) {
  Vec3 e1, e2;
  tangent_basis(a, e1, e2);
  const Vec3 c0 = c2.x() * e1 + c2.y() * e2;
  Eigen::Matrix2d lhs = Eigen::Matrix2d::Zero();
  Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
  double used = 0.0;
  const Index n = pts.cols();
  for (Index i = 0; i < n; ++i) {
    if (!reliable[static_cast<std::size_t>(i)]) continue;
    const Vec3 w = pts.col(i) - c0;
    const double z = a.dot(w);
    const Vec3 radial = w - z * a;
    const double rho = radial.norm();
    if (rho < 1e-9) continue;
    const Vec3 nv = nrm.col(i);
    Eigen::Vector2d u(nv.dot(radial / rho), nv.dot(a));
    const double len = u.norm();
    if (len < 1e-6) continue;
    u /= len;  // sign-invariant below: u and -u give the same projector
    const Eigen::Matrix2d proj = Eigen::Matrix2d::Identity() - u * u.transpose();
    lhs += proj;
    rhs += proj * Eigen::Vector2d(rho, z);
    used += 1.0;
  }
  if (used < 10.0) return std::nullopt;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(lhs);
  if (es.eigenvalues()(0) < 0.15 * used) return std::nullopt;
  return lhs.ldlt().solve(rhs).y();
}

struct SphereFit {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  double residual = std::numeric_limits<double>::infinity();  // RMS of |dist - r|
  bool ok = false;
};

/// Algebraic least-squares sphere through the cluster points.
SphereFit fit_sphere(const Points3& pts) {
  const Index n = pts.cols();
  SphereFit fit;
  if (n < 4) return fit;
  Eigen::MatrixXd lhs(n, 4);
  Eigen::VectorXd rhs(n);
  for (Index i = 0; i < n; ++i) {
    const Vec3 p = pts.col(i);
    lhs.row(i) << 2.0 * p.x(), 2.0 * p.y(), 2.0 * p.z(), 1.0;
    rhs(i) = p.squaredNorm();
  }
  const Eigen::Vector4d sol = (lhs.transpose() * lhs)
                                  .ldlt()
                                  .solve(lhs.transpose() * rhs);
  fit.center = sol.head<3>();
  const double r2 = sol(3) + fit.center.squaredNorm();
  if (!(r2 > 0.0)) return fit;
  fit.radius = std::sqrt(r2);
  double err = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double d = (pts.col(i) - fit.center).norm() - fit.radius;
    err += d * d;
  }
  fit.residual = std::sqrt(err / static_cast<double>(n));
  fit.ok = true;
  return fit;
}

Vec3 canonical_direction(Vec3 a) {
  if (a.z() < 0.0 || (a.z() == 0.0 && (a.y() < 0.0 || (a.y() == 0.0 && a.x() < 0.0)))) {
    a = -a;
  }
  return a;
}

SimilarityTransform rigid_to_standard(const Vec3& axis, const Vec3& center) {
  const Mat3 rot =
      Eigen::Quaterniond::FromTwoVectors(axis, Vec3::UnitZ()).toRotationMatrix();
  SimilarityTransform t;
  t.rotation = rot;
  t.translation = -(rot * center);
  t.scale = 1.0;
  return t;
}

}  // namespace

std::optional<SimilarityTransform> estimate_standard_form(const PointCloud& cluster) {
  const Index n = cluster.size();
  if (n < 10 || !cluster.has_normals()) return std::nullopt;
  const Points3& pts = cluster.points;
  const Points3& nrm = cluster.normals;
  std::vector<char> reliable(cluster.normal_reliable.begin(), cluster.normal_reliable.end());
  Index n_reliable = 0;
  for (char c : reliable) n_reliable += c ? 1 : 0;
  if (n_reliable < 6) return std::nullopt;

  const double diag = Aabb::of(pts).diagonal();
  if (!(diag > 0.0)) return std::nullopt;

  // Planar cluster: normals concentrate on one direction (up to sign).
  const DirectionBins& bins = DirectionBins::level3();
  const Vec3 dominant = dominant_normal_direction(cluster);
  double align = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (!reliable[static_cast<std::size_t>(i)]) continue;
    align += std::abs(nrm.col(i).dot(dominant));
  }
  align /= static_cast<double>(n_reliable);
  const Vec3 centroid = pts.rowwise().mean();
  if (align > 0.95) {
    return rigid_to_standard(canonical_direction(dominant), centroid);
  }

  // Spherical cluster: all points concentric around the algebraic centre.
  const SphereFit sphere = fit_sphere(pts);
  const double sphere_rel =
      sphere.ok ? sphere.residual / std::max(sphere.radius, 1e-12) : 1e300;

  // Rotational cluster: the normal lines, projected along the axis, meet in
  // one point.  Coarse direction search over the icosphere bins, then two
  // local grid refinements.
  Vec3 best_axis = Vec3::UnitZ();
  ConcurrenceFit best_fit;
  for (Index b = 0; b < bins.representatives.cols(); ++b) {
    const Vec3 a = bins.representatives.col(b);
    const ConcurrenceFit fit = axis_concurrence(pts, nrm, reliable, a);
    if (fit.ok && fit.residual < best_fit.residual) {
      best_fit = fit;
      best_axis = a;
    }
  }
  if (best_fit.ok) {
    for (const double step_deg : {1.0, 0.25}) {
      const double step = step_deg * M_PI / 180.0;
      Vec3 e1, e2;
      tangent_basis(best_axis, e1, e2);
      Vec3 improved = best_axis;
      for (int i = -4; i <= 4; ++i) {
        for (int j = -4; j <= 4; ++j) {
          if (i == 0 && j == 0) continue;
          const Vec3 a = (best_axis + std::tan(step * i) * e1 + std::tan(step * j) * e2)
                             .normalized();
          const ConcurrenceFit fit = axis_concurrence(pts, nrm, reliable, a);
          if (fit.ok && fit.residual < best_fit.residual) {
            best_fit = fit;
            improved = a;
          }
        }
      }
      best_axis = improved;
    }
  }
  const double axis_rel = best_fit.ok ? best_fit.residual / diag : 1e300;

  const double kSphereTol = 0.02;
  const double kAxisTol = 0.03;
  const bool sphere_pass = sphere_rel <= kSphereTol;
  const bool axis_pass = axis_rel <= kAxisTol;
  if (sphere_pass && (!axis_pass || sphere_rel <= axis_rel)) {
    SimilarityTransform t;
    t.translation = -sphere.center;
    return t;
  }
  if (axis_pass) {
    const ConcurrenceFit fit = axis_concurrence(pts, nrm, reliable, best_axis);
    const double along = meridian_anchor(pts, nrm, reliable, best_axis, fit.center)
                             .value_or(axis_anchor(pts, nrm, reliable, best_axis, fit.center));
    Vec3 e1, e2;
    tangent_basis(best_axis, e1, e2);
    const Vec3 center = fit.center.x() * e1 + fit.center.y() * e2 + along * best_axis;
    return rigid_to_standard(canonical_direction(best_axis), center);
  }
  return std::nullopt;
}

std::vector<std::vector<Index>> fallback_oversegment(const PointCloud& cluster,
                                                     const PipelineConfig& config,
                                                     std::uint64_t salt) {
  const Index n = cluster.size();
  std::vector<std::vector<Index>> out;
  if (n < config.dbscan_min_pts || !cluster.has_normals()) {
    if (n > 0) {
      std::vector<Index> all(static_cast<std::size_t>(n));
      std::iota(all.begin(), all.end(), Index{0});
      out.push_back(std::move(all));
    }
    return out;
  }
  const Points3& pts = cluster.points;
  const Points3& nrm = cluster.normals;
  const double eps = config.eps_fraction * Aabb::of(pts).diagonal();
  const double kCos30 = std::cos(30.0 * M_PI / 180.0);
  const double kSin30 = 0.5;

  std::mt19937_64 rng(config.seed ^ (0x9e3779b97f4a7c15ULL * (salt + 1)));
  std::vector<Index> remaining(static_cast<std::size_t>(n));
  std::iota(remaining.begin(), remaining.end(), Index{0});

  const int kProposals = 192;
  const int kMaxExtractions = 32;
  for (int round = 0; round < kMaxExtractions; ++round) {
    if (static_cast<Index>(remaining.size()) < config.dbscan_min_pts) break;
    std::vector<Index> best;
    for (int t = 0; t < kProposals; ++t) {
      std::uniform_int_distribution<std::size_t> pick(0, remaining.size() - 1);
      std::vector<Index> inliers;
      const int kind = t % 3;
      if (kind == 0) {  // plane through one oriented point
        const Index i = remaining[pick(rng)];
        const Vec3 p = pts.col(i);
        const Vec3 nv = nrm.col(i);
        for (const Index j : remaining) {
          if (std::abs((pts.col(j) - p).dot(nv)) <= eps &&
              std::abs(nrm.col(j).dot(nv)) >= kCos30) {
            inliers.push_back(j);
          }
        }
      } else if (kind == 1) {  // sphere from two oriented points
        const Index i1 = remaining[pick(rng)];
        const Index i2 = remaining[pick(rng)];
        if (i1 == i2) continue;
        const Vec3 p1 = pts.col(i1), n1 = nrm.col(i1);
        const Vec3 p2 = pts.col(i2), n2 = nrm.col(i2);
        // Closest approach of the two normal lines.
        const double b = n1.dot(n2);
        const double denom = 1.0 - b * b;
        if (denom < 1e-6) continue;
        const Vec3 w = p1 - p2;
        const double d = n1.dot(w), e = n2.dot(w);
        const double s = (b * e - d) / denom;
        const double u = (e - b * d) / denom;
        const Vec3 q1 = p1 + s * n1;
        const Vec3 q2 = p2 + u * n2;
        if ((q1 - q2).norm() > 2.0 * eps) continue;
        const Vec3 c = 0.5 * (q1 + q2);
        const double r = 0.5 * ((p1 - c).norm() + (p2 - c).norm());
        if (!(r > eps)) continue;
        for (const Index j : remaining) {
          const Vec3 radial = pts.col(j) - c;
          const double len = radial.norm();
          if (std::abs(len - r) > eps || len < 1e-12) continue;
          if (std::abs(nrm.col(j).dot(radial / len)) >= kCos30) inliers.push_back(j);
        }
      } else {  // cylinder from two oriented points: axis n1 x n2
        const Index i1 = remaining[pick(rng)];
        const Index i2 = remaining[pick(rng)];
        if (i1 == i2) continue;
        const Vec3 p1 = pts.col(i1), n1 = nrm.col(i1);
        const Vec3 p2 = pts.col(i2), n2 = nrm.col(i2);
        Vec3 w = n1.cross(n2);
        if (w.norm() < 0.1) continue;
        w.normalize();
        Vec3 e1, e2;
        tangent_basis(w, e1, e2);
        // Intersect the two projected normal lines in the axis-normal plane.
        const Eigen::Vector2d a1(p1.dot(e1), p1.dot(e2)), d1(n1.dot(e1), n1.dot(e2));
        const Eigen::Vector2d a2(p2.dot(e1), p2.dot(e2)), d2(n2.dot(e1), n2.dot(e2));
        const double det = d1.x() * (-d2.y()) - (-d2.x()) * d1.y();
        if (std::abs(det) < 1e-9) continue;
        const Eigen::Vector2d delta = a2 - a1;
        const double s = (delta.x() * (-d2.y()) - (-d2.x()) * delta.y()) / det;
        const Eigen::Vector2d c2 = a1 + s * d1;
        const double r = 0.5 * ((a1 - c2).norm() + (a2 - c2).norm());
        if (!(r > eps)) continue;
        for (const Index j : remaining) {
          const Vec3 p = pts.col(j);
          const Eigen::Vector2d q(p.dot(e1), p.dot(e2));
          if (std::abs((q - c2).norm() - r) > eps) continue;
          if (std::abs(nrm.col(j).dot(w)) <= kSin30) inliers.push_back(j);
        }
      }
      if (inliers.size() > best.size()) best = std::move(inliers);
    }
    if (static_cast<Index>(best.size()) < config.dbscan_min_pts) break;
    std::vector<char> taken(static_cast<std::size_t>(n), 0);
    for (const Index j : best) taken[static_cast<std::size_t>(j)] = 1;
    std::vector<Index> next;
    next.reserve(remaining.size() - best.size());
    for (const Index j : remaining) {
      if (!taken[static_cast<std::size_t>(j)]) next.push_back(j);
    }
    out.push_back(std::move(best));
    remaining = std::move(next);
  }
  if (static_cast<Index>(remaining.size()) >= config.dbscan_min_pts) {
    out.push_back(std::move(remaining));
  }
  return out;
}

}  // namespace primht
