#pragma once

#include "primht/family.hpp"

namespace primht {

/// Controls for solving the parameter locus of a point.
struct HtOptions {
  int samples_periodic = 64;  // parametric samples per periodic coordinate
  int samples_bounded = 32;   // parametric samples per bounded coordinate
  /// Candidate values per parameter dimension for families whose locus is
  /// swept along accumulator axes (see swept_dims); unused dims stay empty.
  std::array<std::vector<double>, 4> sweep;
  /// Forward-evaluation residual above which a solved sample is discarded.
  /// Only the helical-strip family can produce nonzero residuals (its locus
  /// is empty for points off the pitch-one helicoid set).
  double membership_tol = 1e-6;
  int helix_n = 1;
  int helix_m_min = -2, helix_m_max = 2;  // turn ambiguity v = atan2 + 2 pi m
};

/// Parameter-space samples of the locus of surfaces through one point.
struct HtSamples {
  std::vector<Eigen::VectorXd> samples;
  long discarded = 0;  // singular, inadmissible, or out-of-tolerance draws
};

/// Parameter dimensions whose values must be supplied in HtOptions::sweep
/// (typically the accumulator's cell centres along those axes).
const std::vector<int>& swept_dims(FamilyId family);

/// Solve the Hough locus of P for one family.  Every returned sample `a`
/// reproduces P through the forward map within membership_tol for its
/// generating (u*, v*).
HtSamples solve_ht_sample(FamilyId family, const Vec3& point, const HtOptions& options);

}  // namespace primht
