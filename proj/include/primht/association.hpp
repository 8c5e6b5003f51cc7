#pragma once

#include "primht/pipeline.hpp"

namespace primht {

/// Which terms enter the pairwise dissimilarity.  Each mode adds terms on top
/// of the previous one: radius < rototranslation (all intrinsics) <
/// translation (+ axis angle) < same-surface (+ positional terms).
enum class RelationMode { kRadius, kRototranslation, kTranslation, kSameSurface };

/// Verified relation of a group, strongest first.
enum class Relation {
  kSameSurface,
  kTranslationEqual,
  kRototranslationEqual,
  kSharedRadiusParallelAxes,
  kSharedRadius,
};

const std::string& to_string(Relation relation);
const std::string& to_string(RelationMode mode);
std::optional<RelationMode> relation_mode_from_string(const std::string& name);

struct AssociationConfig {
  RelationMode mode = RelationMode::kTranslation;
  double cut = 1.0;                 // dendrogram cut on the normalized entries
  double length_fraction = 0.02;    // length tolerance, fraction of reference_diagonal
  double angle_tol_deg = 2.0;       // axis tolerance
  double reference_diagonal = 1.0;  // scene bbox diagonal used for normalization
  double eps = 0.0;                 // absolute band for the same-surface point test
  int workers = 1;
};

struct AssociationGroup {
  std::vector<int> members;  // segment ids, ascending
  Relation relation = Relation::kSharedRadius;
  /// Rigid witness per member mapping member 0's instance onto it (identity
  /// first); filled for translation- and rototranslation-equal groups.
  std::vector<SimilarityTransform> witnesses;
  int merged_segment = -1;  // id of the union record for same-surface groups
};

struct AssociationResult {
  std::vector<AssociationGroup> groups;
  /// Input records (with merged_into links filled in) plus appended union
  /// records for same-surface groups.
  std::vector<SegmentRecord> segments;
};

/// Symmetric matrix of normalized pairwise dissimilarities (entry 1.0 = at
/// tolerance); cross-family pairs get +infinity.  Entries combine the
/// mode-dependent terms by maximum.
Eigen::MatrixXd build_dissimilarity(const std::vector<SegmentRecord>& segments,
                                    const AssociationConfig& config);

/// Agglomerative complete-linkage clustering: repeatedly merges the pair of
/// clusters with the smallest maximal pairwise entry while it stays <= cut
/// (infinite entries never merge).  Ties break towards the smallest member
/// ids.  Returns all clusters (including singletons), each ascending, ordered
/// by smallest member.
std::vector<std::vector<int>> complete_linkage(const Eigen::MatrixXd& dissimilarity, double cut);

/// Full association: dissimilarity, linkage, then relation classification
/// strongest-first.  Groups that verify no relation dissolve into singletons
/// (dropped).  When `cloud` is given, same-surface groups produce a merged
/// union record with its MFE recomputed over the union.
AssociationResult associate(std::vector<SegmentRecord> segments, const AssociationConfig& config,
                            const PointCloud* cloud = nullptr);

}  // namespace primht
