#pragma once

#include "primht/core.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace primht {

/// Registered primitive families, ordered by ascending parameter-space
/// dimension (recognition tests families in this order).
enum class FamilyId {
  kPlane,          // z = k                                          params (k)
  kSphere,         // |p| = r                                        params (r)
  kCylinder,       // x^2 + y^2 = r^2                                params (r)
  kCone,           // x^2 + y^2 + a (z-b)^2 = 0, a < 0               params (a, b)
  kTorus,          // (R - rho)^2 + z^2 = r^2, 0 < r < R             params (R, r)
  kEllipsoid,      // rho^2/p^2 + z^2/q^2 = 1 (revolution)           params (p, q)
  kNcxCylinder,    // rho(u) = a / (1 + b cos 5u), z free            params (a, b)
  kRevSurface,     // (a u cos v, a u sin v, b / u^5)                params (a, b)
  kHelicalStrip,   // (R(u) cos v, R(u) sin v, v), R = a u + (1-u) b params (a, b)
  kNcxCone,        // scaled 5-convexity curve, z = A v + B          params (a, b, A, B)
  kHelicalSurface, // (R(u) cos v, R(u) sin v, k1 (u + n v) + k2)    params (R1, R2, k1, k2)
};

inline constexpr std::array<FamilyId, 11> kAllFamilies = {
    FamilyId::kPlane,        FamilyId::kSphere,     FamilyId::kCylinder,
    FamilyId::kCone,         FamilyId::kTorus,      FamilyId::kEllipsoid,
    FamilyId::kNcxCylinder,  FamilyId::kRevSurface, FamilyId::kHelicalStrip,
    FamilyId::kNcxCone,      FamilyId::kHelicalSurface};

/// Static description of a family.
struct FamilySpec {
  FamilyId id;
  std::string name;                       // stable string id used in CLI/JSON
  int dim;                                // number of voted parameters
  std::vector<std::string> param_names;
  std::array<double, 2> u_domain;
  std::array<double, 2> v_domain;
  bool u_periodic;
  bool v_periodic;
};

const FamilySpec& family_spec(FamilyId id);
std::optional<FamilyId> family_from_string(const std::string& name);
const std::string& to_string(FamilyId id);

/// A concrete surface: family + standard-form parameters + pose.  The pose
/// maps standard-form coordinates into the frame the instance lives in; its
/// scale converts standard-form lengths into that frame.
struct PrimitiveInstance {
  FamilyId family = FamilyId::kPlane;
  Eigen::VectorXd params;
  SimilarityTransform pose;
  int helix_n = 1;  // integer winding constant, used by helical-surface only
};

/// Forward evaluation of the standard-form surface at (u, v); pose not applied.
Vec3 evaluate(FamilyId family, const Eigen::VectorXd& params, double u, double v, int helix_n = 1);

/// Analytic partial derivatives (dF/du, dF/dv) of the standard form.
Eigen::Matrix<double, 3, 2> jacobian_uv(FamilyId family, const Eigen::VectorXd& params, double u,
                                        double v, int helix_n = 1);

/// Whether a parameter vector lies in the family's admissible set.
bool admissible(FamilyId family, const Eigen::VectorXd& params);

/// Whether parameter `k` carries length units (i.e. scales with pose.scale);
/// dimensionless shape coefficients (cone `a`, convexity `b`) do not.
bool param_is_length(FamilyId family, int k);

/// Rototranslation-invariant summary of an instance, expressed in the frame
/// the pose maps into (lengths multiplied by pose.scale).
struct GeometricDescriptor {
  FamilyId family;
  std::vector<std::pair<std::string, double>> intrinsic;
  Vec3 axis;    // unit axis direction, sign-normalized
  Vec3 anchor;  // center / vertex / plane foot
};

GeometricDescriptor describe(const PrimitiveInstance& instance);

/// Points on the posed surface over a uniform (u, v) grid (cell centres of an
/// nu x nv subdivision of `domain`, defaulting to the family domain).
PointCloud sample_surface(const PrimitiveInstance& instance, int nu, int nv);
PointCloud sample_surface(const PrimitiveInstance& instance, int nu, int nv,
                          const std::array<double, 2>& u_domain,
                          const std::array<double, 2>& v_domain);

}  // namespace primht
