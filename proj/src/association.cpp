#include "primht/association.hpp"

#include "primht/parallel.hpp"
#include "primht/surface_distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace primht {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Profile {
  FamilyId family;
  int helix_n = 1;
  std::map<std::string, double> intrinsic;
  Vec3 axis;
  Vec3 anchor;
  Mat3 rotation;  // pose rotation, for azimuthal phase checks
};

Profile make_profile(const SegmentRecord& seg) {
  Profile p;
  const GeometricDescriptor d = describe(seg.instance);
  p.family = d.family;
  p.helix_n = seg.instance.helix_n;
  for (const auto& [name, value] : d.intrinsic) p.intrinsic[name] = value;
  p.axis = d.axis;
  p.anchor = d.anchor;
  p.rotation = seg.instance.pose.rotation;
  return p;
}

bool has_axis(FamilyId family) { return family != FamilyId::kSphere; }

/// 5-fold azimuthal symmetry: translation-equality additionally needs the
/// relative rotation about the axis to hit a symmetry angle.
bool has_phase(FamilyId family) {
  return family == FamilyId::kNcxCylinder || family == FamilyId::kNcxCone;
}

/// Field carrying "the radius" in shared-radius comparisons.
const char* radius_field(FamilyId family) {
  switch (family) {
    case FamilyId::kPlane: return nullptr;
    case FamilyId::kSphere:
    case FamilyId::kCylinder:
    case FamilyId::kTorus: return "r";
    case FamilyId::kCone: return "half_angle";
    case FamilyId::kEllipsoid: return "p";
    case FamilyId::kNcxCylinder:
    case FamilyId::kNcxCone:
    case FamilyId::kRevSurface:
    case FamilyId::kHelicalStrip: return "a";
    case FamilyId::kHelicalSurface: return "R1";
  }
  return nullptr;
}

struct Tolerances {
  double length;     // absolute length tolerance
  double angle_rad;  // absolute angle tolerance
};

/// Normalized difference of one intrinsic field (1.0 = at tolerance).
double field_term(const std::string& name, double a, double b, const Tolerances& tol) {
  if (name == "n") return a == b ? 0.0 : kInf;  // integer winding must match
  if (name == "half_angle") return std::abs(a - b) / tol.angle_rad;
  if (name == "a" || name == "b") {
    // Dimensionless for the cone (covered by half_angle) and the convexity
    // amplitude; length-valued elsewhere.  Callers pass family-filtered names.
    return std::abs(a - b) / 0.02;
  }
  return std::abs(a - b) / tol.length;
}

bool dimensionless_field(FamilyId family, const std::string& name) {
  if (name == "n" || name == "half_angle") return true;
  if (family == FamilyId::kCone && name == "a") return true;
  if ((family == FamilyId::kNcxCylinder || family == FamilyId::kNcxCone) && name == "b")
    return true;
  return false;
}

double intrinsic_term(const Profile& x, const Profile& y, const Tolerances& tol) {
  if (x.family != y.family || x.helix_n != y.helix_n) return kInf;
  double worst = 0.0;
  for (const auto& [name, value] : x.intrinsic) {
    if (x.family == FamilyId::kCone && name == "a") continue;  // half_angle covers it
    const auto it = y.intrinsic.find(name);
    if (it == y.intrinsic.end()) return kInf;
    double term;
    if (dimensionless_field(x.family, name)) {
      term = field_term(name, value, it->second, tol);
    } else {
      term = std::abs(value - it->second) / tol.length;
    }
    worst = std::max(worst, term);
  }
  return worst;
}

double radius_term(const Profile& x, const Profile& y, const Tolerances& tol) {
  if (x.family != y.family) return kInf;
  const char* field = radius_field(x.family);
  if (!field) return kInf;
  const double a = x.intrinsic.at(field), b = y.intrinsic.at(field);
  return field_term(field, a, b, tol);
}

double angular_term(const Profile& x, const Profile& y, const Tolerances& tol) {
  if (!has_axis(x.family)) return 0.0;
  const double c = std::clamp(std::abs(x.axis.dot(y.axis)), 0.0, 1.0);
  return std::acos(c) / tol.angle_rad;
}

double point_line_distance(const Vec3& point, const Vec3& on_line, const Vec3& dir) {
  const Vec3 w = point - on_line;
  return (w - w.dot(dir) * dir).norm();
}

/// Positional terms for the same-surface mode: axis-line separation plus the
/// anchor separation restricted to directions the family does not slide in
/// (cylinders slide along their axis, planes inside themselves).
double positional_term(const Profile& x, const Profile& y, const Tolerances& tol) {
  const Vec3 delta = y.anchor - x.anchor;
  double dist = 0.0;
  switch (x.family) {
    case FamilyId::kPlane:
      dist = std::abs(delta.dot(x.axis));
      break;
    case FamilyId::kSphere:
      dist = delta.norm();
      break;
    case FamilyId::kCylinder:
    case FamilyId::kNcxCylinder:
      dist = (delta - delta.dot(x.axis) * x.axis).norm();
      break;
    default:
      dist = std::max(delta.norm(), std::max(point_line_distance(y.anchor, x.anchor, x.axis),
                                             point_line_distance(x.anchor, y.anchor, y.axis)));
      break;
  }
  return dist / tol.length;
}

double entry(const Profile& x, const Profile& y, RelationMode mode, const Tolerances& tol) {
  switch (mode) {
    case RelationMode::kRadius:
      return radius_term(x, y, tol);
    case RelationMode::kRototranslation:
      return intrinsic_term(x, y, tol);
    case RelationMode::kTranslation:
      return std::max(intrinsic_term(x, y, tol), angular_term(x, y, tol));
    case RelationMode::kSameSurface:
      return std::max({intrinsic_term(x, y, tol), angular_term(x, y, tol),
                       positional_term(x, y, tol)});
  }
  return kInf;
}

Tolerances make_tolerances(const AssociationConfig& config) {
  return {config.length_fraction * config.reference_diagonal,
          config.angle_tol_deg * M_PI / 180.0};
}

/// Relative rotation angle about the (shared) axis, in (-pi, pi].
double relative_phase(const Profile& x, const Profile& y) {
  const Mat3 rel = y.rotation * x.rotation.transpose();
  Vec3 t = x.axis.cross(std::abs(x.axis.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX()).normalized();
  const Vec3 rt = rel * t;
  const Vec3 perp = rt - rt.dot(x.axis) * x.axis;
  if (perp.norm() < 1e-9) return 0.0;
  return std::atan2(x.axis.dot(t.cross(perp.normalized())), t.dot(perp.normalized()));
}

bool phase_ok(const Profile& x, const Profile& y, const Tolerances& tol) {
  if (!has_phase(x.family)) return true;
  const double sym = 2.0 * M_PI / 5.0;
  double phi = std::fmod(relative_phase(x, y), sym);
  if (phi > 0.5 * sym) phi -= sym;
  if (phi < -0.5 * sym) phi += sym;
  return std::abs(phi) <= tol.angle_rad;
}

}  // namespace

const std::string& to_string(Relation relation) {
  static const std::string names[] = {"same-surface", "equal-up-to-translation",
                                      "equal-up-to-rototranslation",
                                      "shared-radius-parallel-axes", "shared-radius"};
  return names[static_cast<int>(relation)];
}

const std::string& to_string(RelationMode mode) {
  static const std::string names[] = {"radius", "rototranslation", "translation",
                                      "same-surface"};
  return names[static_cast<int>(mode)];
}

std::optional<RelationMode> relation_mode_from_string(const std::string& name) {
  for (const RelationMode m : {RelationMode::kRadius, RelationMode::kRototranslation,
                               RelationMode::kTranslation, RelationMode::kSameSurface}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

Eigen::MatrixXd build_dissimilarity(const std::vector<SegmentRecord>& segments,
                                    const AssociationConfig& config) {
  const int n = static_cast<int>(segments.size());
  const Tolerances tol = make_tolerances(config);
  std::vector<Profile> profiles;
  profiles.reserve(segments.size());
  for (const auto& seg : segments) profiles.push_back(make_profile(seg));
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  parallel_chunks(static_cast<Index>(n), config.workers, [&](Index begin, Index end, int) {
    for (Index i = begin; i < end; ++i) {
      for (Index j = 0; j < static_cast<Index>(n); ++j) {
        if (j <= i) continue;
        m(i, j) = entry(profiles[static_cast<std::size_t>(i)],
                        profiles[static_cast<std::size_t>(j)], config.mode, tol);
      }
    }
  });
  // Mirror the upper triangle.
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) m(i, j) = m(j, i);
  }
  return m;
}

std::vector<std::vector<int>> complete_linkage(const Eigen::MatrixXd& dissimilarity, double cut) {
  if (!(cut > 0.0)) throw InvalidInput("complete_linkage: cut must be positive");
  const int n = static_cast<int>(dissimilarity.rows());
  std::vector<std::vector<int>> clusters;
  clusters.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) clusters.push_back({i});
  Eigen::MatrixXd d = dissimilarity;
  std::vector<char> active(static_cast<std::size_t>(n), 1);

  while (true) {
    double best = kInf;
    int bi = -1, bj = -1;
    for (int i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!active[static_cast<std::size_t>(j)]) continue;
        const double v = d(i, j);
        // Ties break towards the smallest member ids: clusters keep the index
        // of their smallest member, so (i, j) order is already canonical.
        if (v < best) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    }
    if (bi < 0 || !(best <= cut) || std::isinf(best)) break;
    // Merge bj into bi (bi keeps the smaller leading member).
    auto& a = clusters[static_cast<std::size_t>(bi)];
    auto& b = clusters[static_cast<std::size_t>(bj)];
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    b.clear();
    active[static_cast<std::size_t>(bj)] = 0;
    for (int k = 0; k < n; ++k) {
      if (!active[static_cast<std::size_t>(k)] || k == bi) continue;
      const double v = std::max(d(bi, k), d(bj, k));
      d(bi, k) = v;
      d(k, bi) = v;
    }
  }

  std::vector<std::vector<int>> out;
  for (int i = 0; i < n; ++i) {
    if (active[static_cast<std::size_t>(i)]) out.push_back(clusters[static_cast<std::size_t>(i)]);
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

AssociationResult associate(std::vector<SegmentRecord> segments, const AssociationConfig& config,
                            const PointCloud* cloud) {
  AssociationResult result;
  const Tolerances tol = make_tolerances(config);
  const Eigen::MatrixXd dis = build_dissimilarity(segments, config);
  const auto clusters = complete_linkage(dis, config.cut);

  std::vector<Profile> profiles;
  profiles.reserve(segments.size());
  for (const auto& seg : segments) profiles.push_back(make_profile(seg));

  int next_id = -1;
  for (const auto& seg : segments) next_id = std::max(next_id, seg.id);
  ++next_id;

  for (const auto& members : clusters) {
    if (members.size() < 2) continue;

    const auto all_pairs = [&](auto&& pred) {
      for (std::size_t i = 0; i < members.size(); ++i) {
        for (std::size_t j = i + 1; j < members.size(); ++j) {
          if (!pred(profiles[static_cast<std::size_t>(members[i])],
                    profiles[static_cast<std::size_t>(members[j])])) {
            return false;
          }
        }
      }
      return true;
    };
    const bool roto_ok =
        all_pairs([&](const Profile& x, const Profile& y) { return intrinsic_term(x, y, tol) <= 1.0; });
    const bool parallel_ok =
        all_pairs([&](const Profile& x, const Profile& y) { return angular_term(x, y, tol) <= 1.0; });
    const bool phases_ok =
        all_pairs([&](const Profile& x, const Profile& y) { return phase_ok(x, y, tol); });
    const bool radius_ok =
        all_pairs([&](const Profile& x, const Profile& y) { return radius_term(x, y, tol) <= 1.0; });

    // Same-surface: one member's instance must explain every member's points.
    int reference = -1;
    if (roto_ok && parallel_ok && cloud && config.eps > 0.0) {
      std::vector<Index> union_idx;
      for (const int m : members) {
        const auto& idx = segments[static_cast<std::size_t>(m)].point_indices;
        union_idx.insert(union_idx.end(), idx.begin(), idx.end());
      }
      std::sort(union_idx.begin(), union_idx.end());
      union_idx.erase(std::unique(union_idx.begin(), union_idx.end()), union_idx.end());
      Points3 pts(3, static_cast<Index>(union_idx.size()));
      for (std::size_t i = 0; i < union_idx.size(); ++i) {
        pts.col(static_cast<Index>(i)) = cloud->points.col(union_idx[i]);
      }
      for (const int m : members) {
        const Eigen::VectorXd dist =
            distances(segments[static_cast<std::size_t>(m)].instance, pts, config.workers);
        if ((dist.array() <= config.eps).all()) {
          reference = m;
          break;
        }
      }
      if (reference >= 0) {
        AssociationGroup group;
        for (const int m : members) group.members.push_back(segments[static_cast<std::size_t>(m)].id);
        group.relation = Relation::kSameSurface;
        SegmentRecord merged;
        merged.id = next_id++;
        merged.instance = segments[static_cast<std::size_t>(reference)].instance;
        merged.point_indices = std::move(union_idx);
        merged.iteration = segments[static_cast<std::size_t>(reference)].iteration;
        merged.cell_widths = segments[static_cast<std::size_t>(reference)].cell_widths;
        merged.mfe = mean_fitting_error(merged.instance, pts, config.workers);
        for (const int m : members) {
          merged.merged_from.push_back(segments[static_cast<std::size_t>(m)].id);
          segments[static_cast<std::size_t>(m)].merged_into = merged.id;
        }
        group.merged_segment = merged.id;
        result.groups.push_back(std::move(group));
        segments.push_back(std::move(merged));
        continue;
      }
    }

    Relation relation;
    if (roto_ok && parallel_ok && phases_ok) {
      relation = Relation::kTranslationEqual;
    } else if (roto_ok) {
      relation = Relation::kRototranslationEqual;
    } else if (radius_ok && parallel_ok) {
      relation = Relation::kSharedRadiusParallelAxes;
    } else if (radius_ok) {
      relation = Relation::kSharedRadius;
    } else {
      continue;  // no verified relation: dissolve into singletons
    }

    AssociationGroup group;
    for (const int m : members) group.members.push_back(segments[static_cast<std::size_t>(m)].id);
    group.relation = relation;
    if (relation == Relation::kTranslationEqual) {
      const Profile& ref = profiles[static_cast<std::size_t>(members.front())];
      for (const int m : members) {
        group.witnesses.push_back(
            SimilarityTransform::translate(profiles[static_cast<std::size_t>(m)].anchor - ref.anchor));
      }
    } else if (relation == Relation::kRototranslationEqual) {
      const auto& ref_pose = segments[static_cast<std::size_t>(members.front())].instance.pose;
      for (const int m : members) {
        group.witnesses.push_back(segments[static_cast<std::size_t>(m)].instance.pose *
                                  ref_pose.inverse());
      }
    }
    result.groups.push_back(std::move(group));
  }

  result.segments = std::move(segments);
  return result;
}

}  // namespace primht
