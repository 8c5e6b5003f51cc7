#pragma once

#include "primht/hough.hpp"

#include <iosfwd>
#include <map>

namespace primht {

struct PipelineConfig {
  std::vector<FamilyId> families{kAllFamilies.begin(), kAllFamilies.end()};
  double eps_fraction = 0.02;   // assignment band, fraction of the bbox diagonal (0.01..0.03)
  double mfe_accept = 0.01;     // mean-fitting-error acceptance threshold
  int knn_normals = 20;
  int dbscan_min_pts = 10;
  double dbscan_radius_factor = 2.0;  // times the mean 10-NN spacing
  double sparsity_factor = 3.0;       // sparse when spacing exceeds this times the cloud's
  int max_iterations = 5;
  std::uint64_t seed = 0;
  int workers = 1;
  HoughConfig hough;                       // persistence_fraction lives here
  std::vector<int> helix_n_values = {1};   // winding constants tried for helical surfaces
  int max_candidates_per_family = 64;

  /// Preset for noisy inputs: looser assignment band and MFE gate, wider
  /// normal neighbourhoods.
  static PipelineConfig noisy();
};

/// One recognized segment.  The instance pose maps its standard form to the
/// input frame; point_indices index the input cloud.
struct SegmentRecord {
  int id = 0;
  PrimitiveInstance instance;
  std::vector<Index> point_indices;
  double mfe = 0.0;
  int iteration = 1;
  /// Accumulator cell width per parameter, converted to input-frame units.
  std::map<std::string, double> cell_widths;
  int merged_into = -1;          // id of the union segment after association
  std::vector<int> merged_from;  // populated on union segments
};

struct PipelineDiagnostics {
  long candidates = 0;
  long rejected_inadmissible = 0;
  long rejected_empty = 0;
  long rejected_sparse = 0;
  long rejected_mfe = 0;
  long fallback_clusters = 0;
  int iterations_run = 0;
};

struct RecognitionResult {
  std::string input_id;
  std::vector<SegmentRecord> segments;
  std::vector<Index> unsegmented;
  PipelineConfig config;
  double input_diagonal = 0.0;  // input-frame bbox diagonal
  PipelineDiagnostics diagnostics;
};

struct Preprocessed {
  PointCloud cloud;      // centred, axis-aligned, unit-cube scaled, with normals
  TransformStack stack;  // maps preprocessed coordinates back to the input frame
};

/// Full preprocessing chain: barycenter centring, normal estimation, rotation
/// of the dominant normal direction onto z, unit-cube scaling.  When no
/// reliable normal exists the rotation step is skipped (identity).
Preprocessed preprocess(const PointCloud& cloud, const PipelineConfig& config);

/// Estimate the rigid map taking a cluster into standard position (axis on z,
/// centre at the origin) from its points and normals.  Returns nullopt when
/// neither the planar, spherical nor rotational model explains the normals.
std::optional<SimilarityTransform> estimate_standard_form(const PointCloud& cluster);

/// Simplified RANSAC splitter for clusters that defeat standard-form
/// estimation: repeatedly extracts the best plane/sphere/cylinder consensus
/// set.  Only the partition is kept; proposal types and parameters are
/// discarded.  Returns index lists into the cluster.
std::vector<std::vector<Index>> fallback_oversegment(const PointCloud& cluster,
                                                     const PipelineConfig& config,
                                                     std::uint64_t salt);

/// Mean fitting error of `points` against the instance: the average
/// point-to-surface distance divided by the diagonal of the points' bbox.
double mean_fitting_error(const PrimitiveInstance& instance, const Points3& points,
                          int workers = 1);

/// Run the full iterative recognition pipeline on an input cloud.
/// `log` receives one structured line per family round (pass nullptr to
/// silence).
RecognitionResult run_pipeline(const PointCloud& cloud, const PipelineConfig& config,
                               std::ostream* log = nullptr);

}  // namespace primht
