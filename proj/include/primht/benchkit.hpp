#pragma once

#include "primht/pipeline.hpp"

namespace primht {

/// One sampled surface piece of a synthetic scene.
struct ScenePatch {
  PrimitiveInstance instance;
  int count = 1;
  std::array<double, 2> u_domain{0.0, 0.0};  // lo == hi means the family default
  std::array<double, 2> v_domain{0.0, 0.0};
  std::vector<std::array<double, 4>> holes;  // removed uv rectangles (u0,u1,v0,v1)
  int label = -2;                            // ground-truth id; -2 = assign patch index
};

struct SceneSpec {
  std::string id;
  std::vector<ScenePatch> patches;
  double sigma = 0.0;            // Gaussian noise std dev (absolute by default)
  bool sigma_relative = false;   // interpret sigma as a fraction of the clean diagonal
  double outlier_fraction = 0.0; // fraction of the final cloud drawn as outliers
  std::uint64_t seed = 0;
};

struct GroundTruth {
  std::vector<int> labels;  // per point; -1 for outliers
  /// Instance per ground-truth label (first patch carrying that label).
  std::vector<std::pair<int, PrimitiveInstance>> instances;

  const PrimitiveInstance* instance_for(int label) const;
  std::vector<int> label_set() const;  // ascending, without -1
};

/// Sample the scene: patch points in patch order, then outliers labelled -1.
/// Deterministic for a fixed seed (per-patch RNG streams).
std::pair<PointCloud, GroundTruth> generate(const SceneSpec& spec);

struct SegmentScore {
  int gt_label = 0;
  int matched = -1;  // output segment id with max overlap, -1 if none
  long tp = 0, fp = 0, fn = 0, tn = 0;
  double dsc = 0, ppv = 0, tpr = 0, npv = 0, tnr = 0, acc = 0;
};

struct MetricsReport {
  std::vector<SegmentScore> per_segment;     // one row per ground-truth label
  double dsc = 0, ppv = 0, tpr = 0, npv = 0, tnr = 0, acc = 0;  // unweighted means
  double mfe_min = 0, mfe_mean = 0, mfe_max = 0;  // over the output segments
};

/// Point-overlap metrics of a recognition result against ground truth: each
/// GT segment is matched to the output segment with the largest intersection
/// (ties to the smallest output id; segments merged into a union record are
/// skipped in favour of the union).   0/0 rates are reported as 0.
MetricsReport score(const RecognitionResult& result, const GroundTruth& gt);

struct ParameterDeviation {
  int gt_label = 0;
  int matched = -1;
  bool family_match = false;
  /// Absolute differences of intrinsic descriptor fields, plus family extras:
  /// plane "k" (signed offset), cone/ncx-cone "apex", sphere/torus/ellipsoid
  /// "center", cylinder/ncx-cylinder "axis_offset", and "axis_angle"
  /// (radians) for all axis families.
  std::vector<std::pair<std::string, double>> deviations;
};

std::vector<ParameterDeviation> parameter_deviation(const RecognitionResult& result,
                                                    const GroundTruth& gt);

/// Aligned-column text table of the report (per-segment rows + aggregate).
std::string format_metrics(const MetricsReport& report);

}  // namespace primht
