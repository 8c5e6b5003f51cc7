#include "primht/surface_distance.hpp"

#include "primht/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace primht {

namespace {

const double kPi = std::acos(-1.0);

/// Distance from 2-D point (rho, h) to the ray t * dir, t >= 0, |dir| = 1.
double ray_distance(double rho, double h, double dx, double dy) {
  const double t = rho * dx + h * dy;
  if (t <= 0.0) return std::hypot(rho, h);
  return std::abs(rho * dy - h * dx);
}

struct GaussNewton {
  const PrimitiveInstance& inst;
  const Vec3& target;             // point in standard-form coordinates
  double u_lo, u_hi, v_lo, v_hi;  // clamp box (infinities allowed)

  double best_d2 = std::numeric_limits<double>::infinity();
  double best_u = 0, best_v = 0;
  bool converged = false;
  std::vector<std::array<double, 3>> seeds = {};  // (d2, u, v)

  double eval_d2(double u, double v) const {
    return (evaluate(inst.family, inst.params, u, v, inst.helix_n) - target).squaredNorm();
  }

  void seed(double u, double v) {
    u = std::clamp(u, u_lo, u_hi);
    v = std::clamp(v, v_lo, v_hi);
    const double d2 = eval_d2(u, v);
    seeds.push_back({d2, u, v});
    if (d2 < best_d2) {
      best_d2 = d2;
      best_u = u;
      best_v = v;
    }
  }

  /// Levenberg-damped Gauss-Newton from one start.
  void descend(double u, double v, double d2) {
    double lambda = 1e-8;
    bool done = false;
    int slow = 0;  // consecutive near-stationary accepted steps
    for (int it = 0; it < 60; ++it) {
      const Vec3 r = evaluate(inst.family, inst.params, u, v, inst.helix_n) - target;
      const Eigen::Matrix<double, 3, 2> J = jacobian_uv(inst.family, inst.params, u, v, inst.helix_n);
      Eigen::Matrix2d H = J.transpose() * J;
      const Eigen::Vector2d g = J.transpose() * r;
      H.diagonal().array() += lambda * (1.0 + H.diagonal().array().abs());
      const Eigen::Vector2d step = H.ldlt().solve(g);
      const double nu = std::clamp(u - step(0), u_lo, u_hi);
      const double nv = std::clamp(v - step(1), v_lo, v_hi);
      const double nd2 = eval_d2(nu, nv);
      if (nd2 < d2) {
        const double rel = (d2 - nd2) / std::max(d2, 1e-300);
        u = nu;
        v = nv;
        d2 = nd2;
        lambda = std::max(lambda * 0.25, 1e-12);
        // A single slow step can be a damped zigzag, not a minimum; require
        // two in a row before declaring convergence.
        slow = rel < 1e-10 ? slow + 1 : 0;
        if (slow >= 2 || d2 == 0.0) {
          done = true;
          break;
        }
      } else {
        lambda *= 8.0;
        if (lambda > 1e8) {
          done = true;  // stuck at a (local) minimum
          break;
        }
      }
    }
    if (d2 < best_d2) {
      best_d2 = d2;
      best_u = u;
      best_v = v;
    }
    converged = converged || done;
  }

  void probe(double u, double v) {
    u = std::clamp(u, u_lo, u_hi);
    v = std::clamp(v, v_lo, v_hi);
    const double d2 = eval_d2(u, v);
    if (d2 < best_d2) {
      best_d2 = d2;
      best_u = u;
      best_v = v;
    }
  }

  /// Shrinking local grid around the incumbent; escapes the slow tail of a
  /// curved-valley zigzag that Levenberg damping cannot.
  void polish(double du, double dv) {
    for (int r = 0; r < 6; ++r) {
      const double su = du / std::pow(3.0, r), sv = dv / std::pow(3.0, r);
      const double cu = best_u, cv = best_v;
      for (int i = -1; i <= 1; ++i) {
        for (int j = -1; j <= 1; ++j) {
          if (i != 0 || j != 0) probe(cu + i * su, cv + j * sv);
        }
      }
    }
  }

  /// Multi-start refinement: descend from the `starts` lowest seeds.  Distinct
  /// basins may tie closely far from the surface, so one start is not enough.
  void refine(double polish_du, double polish_dv, int starts = 4) {
    starts = std::min<int>(starts, static_cast<int>(seeds.size()));
    std::partial_sort(seeds.begin(), seeds.begin() + starts, seeds.end(),
                      [](const auto& a, const auto& b) { return a[0] < b[0]; });
    for (int s = 0; s < starts; ++s) descend(seeds[s][1], seeds[s][2], seeds[s][0]);
    if (polish_du > 0.0 || polish_dv > 0.0) {
      polish(polish_du, polish_dv);
      descend(best_u, best_v, best_d2);
    }
  }
};

DistanceResult standard_distance(const PrimitiveInstance& inst, const Vec3& q) {
  const auto& p = inst.params;
  const double rho = std::hypot(q.x(), q.y());
  const double inf = std::numeric_limits<double>::infinity();

  switch (inst.family) {
    case FamilyId::kPlane:
      return {std::abs(q.z() - p(0)), false};
    case FamilyId::kSphere:
      return {std::abs(q.norm() - p(0)), false};
    case FamilyId::kCylinder:
      return {std::abs(rho - p(0)), false};
    case FamilyId::kCone: {
      // Meridian problem: distance from (rho, h) to the double cone rho = m|h|.
      const double m = std::sqrt(-p(0));
      const double h = q.z() - p(1);
      const double norm = std::sqrt(1.0 + m * m);
      const double d1 = ray_distance(rho, h, m / norm, 1.0 / norm);
      const double d2 = ray_distance(rho, h, m / norm, -1.0 / norm);
      return {std::min(d1, d2), false};
    }
    case FamilyId::kTorus:
      return {std::abs(std::hypot(rho - p(0), q.z()) - p(1)), false};
    default:
      break;
  }

  const auto& spec = family_spec(inst.family);
  GaussNewton gn{inst, q,
                 spec.u_periodic ? -inf : spec.u_domain[0],
                 spec.u_periodic ? inf : spec.u_domain[1],
                 spec.v_periodic ? -inf : spec.v_domain[0],
                 spec.v_periodic ? inf : spec.v_domain[1]};
  const double theta = std::atan2(q.y(), q.x());
  double pol_u = 0.0, pol_v = 0.0;  // polish window, one seed spacing

  switch (inst.family) {
    case FamilyId::kEllipsoid: {
      // Azimuth is pinned; seed the polar angle.
      for (int j = 0; j < 64; ++j) gn.seed(theta, (j + 0.5) * kPi / 64.0);
      gn.v_lo = 0.0;
      gn.v_hi = kPi;
      pol_v = kPi / 64.0;
      break;
    }
    case FamilyId::kNcxCylinder: {
      // Extrusion along z: the nearest point shares the query height.
      gn.v_lo = gn.v_hi = q.z();
      for (int i = 0; i < 128; ++i) gn.seed((i + 0.5) * 2.0 * kPi / 128.0, q.z());
      pol_u = 2.0 * kPi / 128.0;
      break;
    }
    case FamilyId::kRevSurface: {
      // Azimuth pinned; seed the profile coordinate (kept off the pole, and
      // allowed past the default window since the profile extends naturally).
      gn.u_lo = 1e-3;
      gn.u_hi = 4.0;
      for (int i = 0; i < 96; ++i) gn.seed(0.05 + (i + 0.5) * 3.0 / 96.0, theta);
      pol_u = 3.0 / 96.0;
      break;
    }
    case FamilyId::kNcxCone: {
      gn.v_lo = 1e-6;
      gn.v_hi = 2.0;
      for (int i = 0; i < 48; ++i) {
        const double u = (i + 0.5) * 2.0 * kPi / 48.0;
        for (int j = 0; j < 24; ++j) {
          gn.seed(u, spec.v_domain[0] + (j + 0.5) * (spec.v_domain[1] - spec.v_domain[0]) / 24.0);
        }
        // The height-matching coordinate is often the basin for near points.
        if (std::abs(p(2)) > 1e-12) gn.seed(u, (q.z() - p(3)) / p(2));
      }
      pol_u = 2.0 * kPi / 48.0;
      pol_v = (spec.v_domain[1] - spec.v_domain[0]) / 24.0;
      break;
    }
    case FamilyId::kHelicalStrip: {
      // Pitch one: the nearest turn has v near z (+- a turn for safety).
      gn.v_lo = -inf;
      gn.v_hi = inf;
      for (int i = 0; i < 24; ++i) {
        const double u = (i + 0.5) / 24.0;
        for (int m = -1; m <= 1; ++m) gn.seed(u, q.z() + 2.0 * kPi * m);
      }
      // Also seed the query azimuth turns, which matter for far points.
      for (int i = 0; i < 24; ++i) {
        const double u = (i + 0.5) / 24.0;
        const double base = theta + 2.0 * kPi * std::round((q.z() - theta) / (2.0 * kPi));
        gn.seed(u, base);
      }
      pol_u = 1.0 / 24.0;
      pol_v = 2.0 * kPi / 24.0;
      break;
    }
    case FamilyId::kHelicalSurface: {
      const double k1 = p(2), k2 = p(3);
      const int n = inst.helix_n;
      gn.u_lo = 0.0;
      gn.u_hi = 2.0 * kPi;
      gn.v_lo = -inf;
      gn.v_hi = inf;
      if (std::abs(k1) > 1e-12 && n != 0) {
        // Seed v so the height matches, for each profile sample; snap the
        // azimuth-consistent turns too.
        for (int i = 0; i < 48; ++i) {
          const double u = (i + 0.5) * 2.0 * kPi / 48.0;
          const double v_height = ((q.z() - k2) / k1 - u) / n;
          gn.seed(u, v_height);
          const double v_angle =
              theta + 2.0 * kPi * std::round((v_height - theta) / (2.0 * kPi));
          gn.seed(u, v_angle);
        }
      } else if (std::abs(k1) > 1e-12) {  // n == 0: height fixes u
        const double u = std::clamp((q.z() - k2) / k1, 0.0, 2.0 * kPi);
        for (int j = 0; j < 64; ++j) gn.seed(u, (j + 0.5) * 2.0 * kPi / 64.0);
      } else {  // degenerate flat ring
        for (int i = 0; i < 32; ++i)
          for (int j = 0; j < 16; ++j)
            gn.seed((i + 0.5) * 2.0 * kPi / 32.0, (j + 0.5) * 2.0 * kPi / 16.0);
      }
      pol_u = 2.0 * kPi / 48.0;
      pol_v = 2.0 * kPi / 48.0;
      break;
    }
    default:
      throw InvalidInput("distance: unhandled family");
  }

  gn.refine(pol_u, pol_v);
  return {std::sqrt(gn.best_d2), !gn.converged};
}

}  // namespace

DistanceResult distance_ex(const PrimitiveInstance& inst, const Vec3& point) {
  // Work in standard-form coordinates, then scale the result back out.
  const Vec3 q = inst.pose.inverse().apply(point);
  DistanceResult res = standard_distance(inst, q);
  res.distance *= inst.pose.scale;
  return res;
}

Eigen::VectorXd distances(const PrimitiveInstance& inst, const Points3& points, int workers) {
  Eigen::VectorXd out(points.cols());
  const SimilarityTransform inv = inst.pose.inverse();
  parallel_chunks(points.cols(), workers, [&](Index begin, Index end, int) {
    for (Index i = begin; i < end; ++i) {
      out(i) = standard_distance(inst, inv.apply(Vec3(points.col(i)))).distance * inst.pose.scale;
    }
  });
  return out;
}

}  // namespace primht
