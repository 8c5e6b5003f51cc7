#include "primht/ht_solve.hpp"

#include <cmath>
#include <map>

namespace primht {

namespace {

const double kPi = std::acos(-1.0);

/// Uniform cell-centre samples of [lo, hi].
std::vector<double> centered_grid(double lo, double hi, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + (i + 0.5) * (hi - lo) / n;
  return g;
}

template <typename... Ts>
void emit(HtSamples& out, Ts... values) {
  Eigen::VectorXd s(sizeof...(values));
  int i = 0;
  ((s(i++) = values), ...);
  out.samples.push_back(std::move(s));
}

}  // namespace

const std::vector<int>& swept_dims(FamilyId family) {
  static const std::map<FamilyId, std::vector<int>> dims = {
      {FamilyId::kPlane, {}},
      {FamilyId::kSphere, {}},
      {FamilyId::kCylinder, {}},
      {FamilyId::kCone, {1}},          // sweep b, solve a
      {FamilyId::kTorus, {0}},         // sweep R, solve r
      {FamilyId::kEllipsoid, {0, 1}},  // sweep p (or q for equatorial points)
      {FamilyId::kNcxCylinder, {1}},   // sweep b, solve a
      {FamilyId::kRevSurface, {0}},    // sweep a, solve b
      {FamilyId::kHelicalStrip, {0}},  // sweep a, solve b
      {FamilyId::kNcxCone, {1, 2}},    // sweep b and A, solve a and B
      {FamilyId::kHelicalSurface, {0, 2}},  // sweep R1 and k1, solve R2 and k2
  };
  auto it = dims.find(family);
  if (it == dims.end()) throw InvalidInput("swept_dims: unknown family");
  return it->second;
}

HtSamples solve_ht_sample(FamilyId family, const Vec3& P, const HtOptions& opt) {
  HtSamples out;
  const double x = P.x(), y = P.y(), z = P.z();
  const double rho = std::hypot(x, y);
  const auto& spec = family_spec(family);

  // Fail fast on a missing sweep so callers cannot silently vote nothing.
  for (int d : swept_dims(family)) {
    if (opt.sweep[static_cast<std::size_t>(d)].empty())
      throw InvalidInput("solve_ht_sample: missing sweep values for " + spec.name + " dim " +
                         std::to_string(d));
  }

  switch (family) {
    case FamilyId::kPlane:
      emit(out, z);
      break;

    case FamilyId::kSphere: {
      const double r = P.norm();
      if (r > 0.0) {
        emit(out, r);
      } else {
        ++out.discarded;
      }
      break;
    }

    case FamilyId::kCylinder:
      if (rho > 0.0) {
        emit(out, rho);
      } else {
        ++out.discarded;
      }
      break;

    case FamilyId::kCone:
      if (rho <= 0.0) {
        ++out.discarded;  // on the axis: only the inadmissible a = 0 fits
        break;
      }
      for (double b : opt.sweep[1]) {
        const double h = z - b;
        if (std::abs(h) < 1e-12) {
          ++out.discarded;  // apex plane: a is unconstrained
          continue;
        }
        emit(out, -(rho * rho) / (h * h), b);
      }
      break;

    case FamilyId::kTorus:
      for (double R : opt.sweep[0]) {
        const double r = std::hypot(R - rho, z);
        if (r > 0.0 && r < R) {
          emit(out, R, r);
        } else {
          ++out.discarded;
        }
      }
      break;

    case FamilyId::kEllipsoid: {
      const double s = rho * rho, t = z * z;
      if (std::abs(z) <= 1e-9) {
        // Equatorial point: p is pinned, q is free.
        if (rho > 0.0) {
          for (double q : opt.sweep[1]) emit(out, rho, q);
        } else {
          ++out.discarded;
        }
      } else {
        for (double p : opt.sweep[0]) {
          const double denom = 1.0 - s / (p * p);
          if (denom <= 1e-12) {
            ++out.discarded;
            continue;
          }
          emit(out, p, std::sqrt(t / denom));
        }
      }
      break;
    }

    case FamilyId::kNcxCylinder: {
      if (rho <= 0.0) {
        ++out.discarded;
        break;
      }
      const double c5 = std::cos(5.0 * std::atan2(y, x));
      for (double b : opt.sweep[1]) {
        const double denom = 1.0 + b * c5;
        if (std::abs(b) >= 1.0 || denom <= 1e-9) {
          ++out.discarded;
          continue;
        }
        emit(out, rho * denom, b);
      }
      break;
    }

    case FamilyId::kRevSurface:
      if (rho <= 0.0) {
        ++out.discarded;
        break;
      }
      for (double a : opt.sweep[0]) {
        if (a <= 0.0) {
          ++out.discarded;
          continue;
        }
        const double u = rho / a;
        emit(out, a, z * std::pow(u, 5));
      }
      break;

    case FamilyId::kHelicalStrip: {
      // v is pinned to z by the unit pitch; the signed radius is the radial
      // component of (x, y) along the angle v, and the tangential component
      // is the unavoidable membership residual.
      const double cv = std::cos(z), sv = std::sin(z);
      const double radius = x * cv + y * sv;
      const double tangential = std::abs(-x * sv + y * cv);
      if (tangential > opt.membership_tol || radius <= 0.0) {
        ++out.discarded;
        break;
      }
      const auto u_grid = centered_grid(spec.u_domain[0], spec.u_domain[1], opt.samples_bounded);
      for (double u : u_grid) {
        if (1.0 - u < 1e-9) continue;
        for (double a : opt.sweep[0]) {
          const double b = (radius - a * u) / (1.0 - u);
          if (a > 0.0 && b > 0.0) {
            emit(out, a, b);
          } else {
            ++out.discarded;
          }
        }
      }
      break;
    }

    case FamilyId::kNcxCone: {
      if (rho <= 0.0) {
        ++out.discarded;
        break;
      }
      const double c5 = std::cos(5.0 * std::atan2(y, x));
      const auto v_grid = centered_grid(spec.v_domain[0], spec.v_domain[1], opt.samples_bounded);
      for (double v : v_grid) {
        if (v <= 1e-9) continue;
        for (double b : opt.sweep[1]) {
          const double denom = 1.0 + b * c5;
          if (std::abs(b) >= 1.0 || denom <= 1e-9) {
            ++out.discarded;
            continue;
          }
          const double a = rho * denom / v;
          for (double A : opt.sweep[2]) emit(out, a, b, A, z - A * v);
        }
      }
      break;
    }

    case FamilyId::kHelicalSurface: {
      if (rho <= 0.0) {
        ++out.discarded;
        break;
      }
      const double theta = std::atan2(y, x);
      const auto u_grid = centered_grid(spec.u_domain[0], spec.u_domain[1], opt.samples_bounded);
      for (double u : u_grid) {
        const double c = 0.5 * (std::cos(u) + 1.0);
        if (c < 1e-6 || 1.0 - c < 1e-6) continue;  // R1/R2 separation degenerates
        for (double R1 : opt.sweep[0]) {
          const double R2 = (rho - R1 * (1.0 - c)) / c;
          if (R2 <= 0.0) {
            ++out.discarded;
            continue;
          }
          for (int m = opt.helix_m_min; m <= opt.helix_m_max; ++m) {
            const double v = theta + 2.0 * kPi * m;
            const double w = u + opt.helix_n * v;
            for (double k1 : opt.sweep[2]) emit(out, R1, R2, k1, z - k1 * w);
          }
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace primht
