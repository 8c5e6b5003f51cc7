#include "primht/family.hpp"

#include <cmath>
#include <map>

namespace primht {

namespace {

const double kPi = std::acos(-1.0);

std::vector<FamilySpec> make_registry() {
  auto two_pi = 2.0 * kPi;
  std::vector<FamilySpec> specs = {
      {FamilyId::kPlane, "plane", 1, {"k"}, {-0.5, 0.5}, {-0.5, 0.5}, false, false},
      {FamilyId::kSphere, "sphere", 1, {"r"}, {0.0, two_pi}, {0.0, kPi}, true, false},
      {FamilyId::kCylinder, "cylinder", 1, {"r"}, {0.0, two_pi}, {-0.5, 0.5}, true, false},
      {FamilyId::kCone, "cone", 2, {"a", "b"}, {0.0, two_pi}, {-0.5, 0.5}, true, false},
      {FamilyId::kTorus, "torus", 2, {"R", "r"}, {0.0, two_pi}, {0.0, two_pi}, true, true},
      {FamilyId::kEllipsoid, "ellipsoid", 2, {"p", "q"}, {0.0, two_pi}, {0.0, kPi}, true, false},
      {FamilyId::kNcxCylinder, "ncx-cylinder", 2, {"a", "b"}, {0.0, two_pi}, {-0.5, 0.5}, true, false},
      {FamilyId::kRevSurface, "rev-surface", 2, {"a", "b"}, {0.6, 1.6}, {0.0, two_pi}, false, true},
      {FamilyId::kHelicalStrip, "helical-strip", 2, {"a", "b"}, {0.0, 1.0}, {-kPi, kPi}, false, false},
      {FamilyId::kNcxCone, "ncx-cone", 4, {"a", "b", "A", "B"}, {0.0, two_pi}, {0.2, 1.2}, true, false},
      {FamilyId::kHelicalSurface, "helical-surface", 4, {"R1", "R2", "k1", "k2"},
       {0.0, two_pi}, {0.0, two_pi}, false, false},
  };
  return specs;
}

const std::vector<FamilySpec>& registry() {
  static const std::vector<FamilySpec> specs = make_registry();
  return specs;
}

}  // namespace

const FamilySpec& family_spec(FamilyId id) {
  for (const auto& s : registry()) {
    if (s.id == id) return s;
  }
  throw InvalidInput("unknown family id");
}

std::optional<FamilyId> family_from_string(const std::string& name) {
  for (const auto& s : registry()) {
    if (s.name == name) return s.id;
  }
  return std::nullopt;
}

const std::string& to_string(FamilyId id) { return family_spec(id).name; }

Vec3 evaluate(FamilyId family, const Eigen::VectorXd& params, double u, double v, int helix_n) {
  switch (family) {
    case FamilyId::kPlane:
      return {u, v, params(0)};
    case FamilyId::kSphere: {
      const double r = params(0);
      return {r * std::cos(u) * std::sin(v), r * std::sin(u) * std::sin(v), r * std::cos(v)};
    }
    case FamilyId::kCylinder: {
      const double r = params(0);
      return {r * std::cos(u), r * std::sin(u), v};
    }
    case FamilyId::kCone: {
      // Signed radius m*v covers both nappes smoothly; apex at z = b.
      const double m = std::sqrt(-params(0));
      return {m * v * std::cos(u), m * v * std::sin(u), params(1) + v};
    }
    case FamilyId::kTorus: {
      const double rho = params(0) + params(1) * std::cos(u);
      return {rho * std::cos(v), rho * std::sin(v), params(1) * std::sin(u)};
    }
    case FamilyId::kEllipsoid: {
      const double p = params(0), q = params(1);
      return {p * std::cos(u) * std::sin(v), p * std::sin(u) * std::sin(v), q * std::cos(v)};
    }
    case FamilyId::kNcxCylinder: {
      const double rho = params(0) / (1.0 + params(1) * std::cos(5.0 * u));
      return {rho * std::cos(u), rho * std::sin(u), v};
    }
    case FamilyId::kRevSurface: {
      const double rho = params(0) * u;
      return {rho * std::cos(v), rho * std::sin(v), params(1) / std::pow(u, 5)};
    }
    case FamilyId::kHelicalStrip: {
      const double rho = params(0) * u + (1.0 - u) * params(1);
      return {rho * std::cos(v), rho * std::sin(v), v};
    }
    case FamilyId::kNcxCone: {
      const double rho = params(0) * v / (1.0 + params(1) * std::cos(5.0 * u));
      return {rho * std::cos(u), rho * std::sin(u), params(2) * v + params(3)};
    }
    case FamilyId::kHelicalSurface: {
      const double rho = params(0) + 0.5 * (params(1) - params(0)) * (std::cos(u) + 1.0);
      const double z = params(2) * (u + helix_n * v) + params(3);
      return {rho * std::cos(v), rho * std::sin(v), z};
    }
  }
  throw InvalidInput("evaluate: unknown family");
}

Eigen::Matrix<double, 3, 2> jacobian_uv(FamilyId family, const Eigen::VectorXd& params, double u,
                                        double v, int helix_n) {
  Eigen::Matrix<double, 3, 2> J;
  const double cu = std::cos(u), su = std::sin(u);
  const double cv = std::cos(v), sv = std::sin(v);
  switch (family) {
    case FamilyId::kPlane:
      J << 1, 0, 0, 1, 0, 0;
      return J;
    case FamilyId::kSphere: {
      const double r = params(0);
      J << -r * su * sv, r * cu * cv, r * cu * sv, r * su * cv, 0, -r * sv;
      return J;
    }
    case FamilyId::kCylinder: {
      const double r = params(0);
      J << -r * su, 0, r * cu, 0, 0, 1;
      return J;
    }
    case FamilyId::kCone: {
      const double m = std::sqrt(-params(0));
      J << -m * v * su, m * cu, m * v * cu, m * su, 0, 1;
      return J;
    }
    case FamilyId::kTorus: {
      const double R = params(0), r = params(1);
      const double rho = R + r * cu;
      J << -r * su * cv, -rho * sv, -r * su * sv, rho * cv, r * cu, 0;
      return J;
    }
    case FamilyId::kEllipsoid: {
      const double p = params(0), q = params(1);
      J << -p * su * sv, p * cu * cv, p * cu * sv, p * su * cv, 0, -q * sv;
      return J;
    }
    case FamilyId::kNcxCylinder: {
      const double a = params(0), b = params(1);
      const double denom = 1.0 + b * std::cos(5.0 * u);
      const double rho = a / denom;
      const double drho = 5.0 * a * b * std::sin(5.0 * u) / (denom * denom);
      J << drho * cu - rho * su, 0, drho * su + rho * cu, 0, 0, 1;
      return J;
    }
    case FamilyId::kRevSurface: {
      const double a = params(0), b = params(1);
      const double rho = a * u;
      J << a * cv, -rho * sv, a * sv, rho * cv, -5.0 * b / std::pow(u, 6), 0;
      return J;
    }
    case FamilyId::kHelicalStrip: {
      const double a = params(0), b = params(1);
      const double rho = a * u + (1.0 - u) * b;
      const double drho = a - b;
      J << drho * cv, -rho * sv, drho * sv, rho * cv, 0, 1;
      return J;
    }
    case FamilyId::kNcxCone: {
      const double a = params(0), b = params(1), A = params(2);
      const double denom = 1.0 + b * std::cos(5.0 * u);
      const double rho = a * v / denom;
      const double drho_du = 5.0 * a * v * b * std::sin(5.0 * u) / (denom * denom);
      const double drho_dv = a / denom;
      J << drho_du * cu - rho * su, drho_dv * cu, drho_du * su + rho * cu, drho_dv * su, 0, A;
      return J;
    }
    case FamilyId::kHelicalSurface: {
      const double R1 = params(0), R2 = params(1), k1 = params(2);
      const double rho = R1 + 0.5 * (R2 - R1) * (cu + 1.0);
      const double drho = -0.5 * (R2 - R1) * su;
      J << drho * cv, -rho * sv, drho * sv, rho * cv, k1, k1 * helix_n;
      return J;
    }
  }
  throw InvalidInput("jacobian_uv: unknown family");
}

bool admissible(FamilyId family, const Eigen::VectorXd& params) {
  if (!params.allFinite()) return false;
  switch (family) {
    case FamilyId::kPlane:
      return true;
    case FamilyId::kSphere:
    case FamilyId::kCylinder:
      return params(0) > 0.0;
    case FamilyId::kCone:
      return params(0) < 0.0;
    case FamilyId::kTorus:
      return params(1) > 0.0 && params(1) < params(0);
    case FamilyId::kEllipsoid:
      return params(0) > 0.0 && params(1) > 0.0;
    case FamilyId::kNcxCylinder:
      return params(0) > 0.0 && std::abs(params(1)) < 1.0;
    case FamilyId::kRevSurface:
      return params(0) > 0.0;
    case FamilyId::kHelicalStrip:
      return params(0) > 0.0 && params(1) > 0.0;
    case FamilyId::kNcxCone:
      return params(0) > 0.0 && std::abs(params(1)) < 1.0;
    case FamilyId::kHelicalSurface:
      return params(0) > 0.0 && params(1) > 0.0;
  }
  return false;
}

bool param_is_length(FamilyId family, int k) {
  switch (family) {
    case FamilyId::kCone:
      return k == 1;  // a is a dimensionless opening coefficient
    case FamilyId::kNcxCylinder:
      return k == 0;  // b is a dimensionless convexity amplitude
    case FamilyId::kNcxCone:
      return k != 1;
    default:
      return true;
  }
}

namespace {

Vec3 sign_normalized(Vec3 v) {
  for (int c = 0; c < 3; ++c) {
    if (std::abs(v(c)) > 1e-12) {
      if (v(c) < 0) v = -v;
      break;
    }
  }
  return v;
}

}  // namespace

GeometricDescriptor describe(const PrimitiveInstance& inst) {
  GeometricDescriptor d;
  d.family = inst.family;
  const double s = inst.pose.scale;
  d.axis = sign_normalized(inst.pose.apply_direction(Vec3::UnitZ()).normalized());
  d.anchor = inst.pose.apply(Vec3::Zero());
  const auto& p = inst.params;
  switch (inst.family) {
    case FamilyId::kPlane:
      d.anchor = inst.pose.apply(Vec3(0, 0, p(0)));
      break;
    case FamilyId::kSphere:
      d.intrinsic = {{"r", s * p(0)}};
      break;
    case FamilyId::kCylinder:
      d.intrinsic = {{"r", s * p(0)}};
      break;
    case FamilyId::kCone:
      d.intrinsic = {{"a", p(0)}, {"half_angle", std::atan2(std::sqrt(-p(0)), 1.0)}};
      d.anchor = inst.pose.apply(Vec3(0, 0, p(1)));
      break;
    case FamilyId::kTorus:
      d.intrinsic = {{"R", s * p(0)}, {"r", s * p(1)}};
      break;
    case FamilyId::kEllipsoid:
      d.intrinsic = {{"p", s * p(0)}, {"q", s * p(1)}};
      break;
    case FamilyId::kNcxCylinder:
      d.intrinsic = {{"a", s * p(0)}, {"b", p(1)}};
      break;
    case FamilyId::kRevSurface:
      d.intrinsic = {{"a", s * p(0)}, {"b", s * p(1)}};
      break;
    case FamilyId::kHelicalStrip:
      d.intrinsic = {{"a", s * p(0)}, {"b", s * p(1)}};
      break;
    case FamilyId::kNcxCone:
      d.intrinsic = {{"a", s * p(0)}, {"b", p(1)}, {"A", s * p(2)}};
      d.anchor = inst.pose.apply(Vec3(0, 0, p(3)));
      break;
    case FamilyId::kHelicalSurface:
      d.intrinsic = {{"R1", s * p(0)}, {"R2", s * p(1)}, {"k1", s * p(2)},
                     {"n", static_cast<double>(inst.helix_n)}};
      d.anchor = inst.pose.apply(Vec3(0, 0, p(3)));
      break;
  }
  return d;
}

PointCloud sample_surface(const PrimitiveInstance& inst, int nu, int nv) {
  const auto& spec = family_spec(inst.family);
  return sample_surface(inst, nu, nv, spec.u_domain, spec.v_domain);
}

PointCloud sample_surface(const PrimitiveInstance& inst, int nu, int nv,
                          const std::array<double, 2>& u_domain,
                          const std::array<double, 2>& v_domain) {
  if (nu < 1 || nv < 1) throw InvalidInput("sample_surface: counts must be >= 1");
  if (!admissible(inst.family, inst.params))
    throw InvalidInput("sample_surface: inadmissible parameters for " + to_string(inst.family));
  PointCloud cloud;
  cloud.points.resize(3, static_cast<Index>(nu) * nv);
  Index col = 0;
  for (int i = 0; i < nu; ++i) {
    const double u = u_domain[0] + (i + 0.5) * (u_domain[1] - u_domain[0]) / nu;
    for (int j = 0; j < nv; ++j) {
      const double v = v_domain[0] + (j + 0.5) * (v_domain[1] - v_domain[0]) / nv;
      cloud.points.col(col++) = inst.pose.apply(evaluate(inst.family, inst.params, u, v, inst.helix_n));
    }
  }
  return cloud;
}

}  // namespace primht
