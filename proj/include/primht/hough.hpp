#pragma once

#include "primht/ht_solve.hpp"

#include <filesystem>

namespace primht {

/// Cell spacing along one accumulator axis.  kLogAbs places cell edges
/// geometrically in |value| (used for the cone's opening coefficient, whose
/// admissible range spans several orders of magnitude).
enum class AxisScale { kLinear, kLogAbs };

struct RegionAxis {
  double lo = 0.0, hi = 1.0;  // closed parameter interval, lo < hi
  int cells = 1;
  AxisScale scale = AxisScale::kLinear;
};

/// Axis-aligned box in parameter space with a per-axis discretization.
struct ParameterRegion {
  std::vector<RegionAxis> axes;

  int dim() const { return static_cast<int>(axes.size()); }
  long total_cells() const;

  /// Cell index along `axis` containing `value`, or -1 when outside.
  int cell_of(int axis, double value) const;
  /// Centre of cell `c` along `axis` (in parameter units).
  double center_of(int axis, int c) const;
  /// Width of cell `c` along `axis` (in parameter units).
  double width_of(int axis, int c) const;

  long flatten(const std::vector<int>& cell) const;
  std::vector<int> unflatten(long flat) const;
  Eigen::VectorXd cell_center(long flat) const;
};

struct HoughConfig {
  int cells_low_dim = 256;  // families with up to 2 parameters
  int cells_3d = 64;
  int cells_4d = 32;
  long max_cells = 10'000'000;
  double persistence_fraction = 0.10;
  HtOptions ht;
  int workers = 1;
};

/// Parameter region for one family, derived from the cloud bounds
/// (d = bounding-box diagonal): plane offsets span [-d/2, d/2], radii span
/// (d/200, d/2], height-like offsets span [-d, d], the cone opening spans
/// [-400, -0.01] on a log axis, and convexity amplitudes span [-0.45, 0.45].
ParameterRegion init_region(FamilyId family, const Aabb& bounds, const HoughConfig& config);

struct Accumulator {
  FamilyId family = FamilyId::kPlane;
  ParameterRegion region;
  std::vector<std::uint32_t> counts;

  std::uint64_t total() const;
};

/// Vote the locus of every point into a dense accumulator, one vote per point
/// per cell.  Votes are accumulated into per-worker partial buffers that are
/// reduced by elementwise addition, so results are byte-identical for any
/// worker count.  Throws CapExceeded when the region exceeds config.max_cells.
Accumulator vote(const Points3& points, FamilyId family, const ParameterRegion& region,
                 const HoughConfig& config);

struct Peak {
  long flat = 0;
  Eigen::VectorXd center;
  std::uint32_t height = 0;
  double persistence = 0.0;
};

/// Maxima of the accumulator by superlevel-set persistence on the 2n-adjacent
/// cell graph.  Returns peaks with persistence strictly above
/// `persistence_fraction * max(count)`, ordered by descending height (ties by
/// cell index).  The global maximum has persistence equal to its height.
std::vector<Peak> find_peaks(const Accumulator& acc, double persistence_fraction);

/// Instance at the peak's cell centre (identity pose), or nullopt when the
/// centre violates the family's admissible set.
std::optional<PrimitiveInstance> peak_to_instance(const Peak& peak, FamilyId family);

/// Serialize: one-line JSON header {dims, los, his, cells, scales} followed
/// by '\n' and the counts as raw little-endian uint32 in flat order.
void dump_accumulator(const Accumulator& acc, const std::filesystem::path& path);

}  // namespace primht
