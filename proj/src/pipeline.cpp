#include "primht/pipeline.hpp"

#include "primht/dbscan.hpp"
#include "primht/knn.hpp"
#include "primht/normals.hpp"
#include "primht/preprocess.hpp"
#include "primht/surface_distance.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <ostream>

namespace primht {
namespace {

/// Shared per-run quantities, all in the preprocessed frame.  Cluster frames
/// are rigid copies of it, so lengths (eps, spacings) carry over unchanged.
struct FrameContext {
  double eps = 0.0;            // assignment band
  double cloud_spacing = 0.0;  // mean 10-NN spacing of the full cloud
};

struct Candidate {
  PrimitiveInstance instance;           // identity pose, current frame
  std::map<std::string, double> frame_widths;  // accumulator cell widths
  std::vector<int> claim;               // positions into the frame's point list
  double mfe = 0.0;
};

struct ValidationCounters {
  long rejected_empty = 0;
  long rejected_sparse = 0;
  long rejected_mfe = 0;
};

/// Assignment-band subset, density gate and per-subset MFE check for one
/// candidate over the frame's points.  On success fills claim (positions) and
/// the segment MFE over the claimed union.
bool validate_candidate(Candidate& cand, const Points3& pts, const PipelineConfig& config,
                        const FrameContext& ctx, ValidationCounters& counters) {
  const Eigen::VectorXd dist = distances(cand.instance, pts, config.workers);
  std::vector<int> within;
  for (Index i = 0; i < pts.cols(); ++i) {
    if (dist(i) <= ctx.eps) within.push_back(static_cast<int>(i));
  }
  if (static_cast<int>(within.size()) < config.dbscan_min_pts) {
    ++counters.rejected_empty;
    return false;
  }
  Points3 sel(3, static_cast<Index>(within.size()));
  for (std::size_t i = 0; i < within.size(); ++i) sel.col(static_cast<Index>(i)) = pts.col(within[i]);

  // Density gate: accidental crossings pick up scattered points whose spacing
  // is far above the cloud's sampling density.
  const double spacing = mean_knn_spacing(sel, 10);
  if (spacing > config.sparsity_factor * ctx.cloud_spacing) {
    ++counters.rejected_sparse;
    return false;
  }

  // Dense, connected subsets; each must independently pass the MFE gate.
  // The clustering radius uses the global cloud spacing so that the gate does
  // not loosen on sparse accidental subsets.
  const auto subsets =
      dbscan_clusters(sel, config.dbscan_radius_factor * ctx.cloud_spacing, config.dbscan_min_pts);
  std::vector<int> claim;
  for (const auto& subset : subsets) {
    double sum = 0.0;
    Points3 sub(3, static_cast<Index>(subset.size()));
    for (std::size_t i = 0; i < subset.size(); ++i) {
      sub.col(static_cast<Index>(i)) = sel.col(subset[i]);
      sum += dist(within[static_cast<std::size_t>(subset[i])]);
    }
    const double diag = Aabb::of(sub).diagonal();
    if (!(diag > 0.0)) continue;
    const double mfe = sum / static_cast<double>(subset.size()) / diag;
    if (mfe <= config.mfe_accept) {
      for (const Index s : subset) claim.push_back(within[static_cast<std::size_t>(s)]);
    }
  }
  if (claim.empty()) {
    ++counters.rejected_mfe;
    return false;
  }
  std::sort(claim.begin(), claim.end());
  double sum = 0.0;
  Points3 cpts(3, static_cast<Index>(claim.size()));
  for (std::size_t i = 0; i < claim.size(); ++i) {
    cpts.col(static_cast<Index>(i)) = pts.col(claim[i]);
    sum += dist(claim[i]);
  }
  const double diag = Aabb::of(cpts).diagonal();
  cand.claim = std::move(claim);
  cand.mfe = diag > 0.0 ? sum / static_cast<double>(cand.claim.size()) / diag
                        : std::numeric_limits<double>::infinity();
  return true;
}

struct FrameSegment {
  PrimitiveInstance instance;  // identity pose, current frame
  std::vector<int> positions;  // into the frame's point list, ascending
  double mfe = 0.0;
  std::map<std::string, double> frame_widths;
};

std::vector<FamilyId> ordered_families(const PipelineConfig& config) {
  std::vector<FamilyId> fams = config.families;
  std::sort(fams.begin(), fams.end());
  fams.erase(std::unique(fams.begin(), fams.end()), fams.end());
  return fams;
}

/// One recognition step over one frame: per-family voting, peak extraction,
/// candidate validation and joint overlap resolution (contested points go to
/// the candidate with the lower segment MFE).
std::vector<FrameSegment> recognition_step(const Points3& pts, const PipelineConfig& config,
                                           const FrameContext& ctx, PipelineDiagnostics& diag,
                                           std::ostream* log, const std::string& frame_label,
                                           int iteration) {
  std::vector<Candidate> candidates;
  const Aabb bounds = Aabb::of(pts);
  for (const FamilyId family : ordered_families(config)) {
    const bool helical = family == FamilyId::kHelicalSurface;
    const std::vector<int> windings = helical ? config.helix_n_values : std::vector<int>{1};
    for (const int n : windings) {
      HoughConfig hcfg = config.hough;
      hcfg.workers = config.workers;
      hcfg.ht.helix_n = n;
      const ParameterRegion region = init_region(family, bounds, hcfg);
      const Accumulator acc = vote(pts, family, region, hcfg);
      const std::vector<Peak> peaks = find_peaks(acc, hcfg.persistence_fraction);
      int taken = 0;
      int accepted = 0;
      ValidationCounters counters;
      for (const Peak& peak : peaks) {
        if (taken >= config.max_candidates_per_family) break;
        ++taken;
        ++diag.candidates;
        auto instance = peak_to_instance(peak, family);
        if (!instance) {
          ++diag.rejected_inadmissible;
          continue;
        }
        instance->helix_n = n;
        Candidate cand;
        cand.instance = *instance;
        const auto cell = region.unflatten(peak.flat);
        const auto& names = family_spec(family).param_names;
        for (int d = 0; d < region.dim(); ++d) {
          cand.frame_widths[names[static_cast<std::size_t>(d)]] = region.width_of(d, cell[static_cast<std::size_t>(d)]);
        }
        if (validate_candidate(cand, pts, config, ctx, counters)) {
          candidates.push_back(std::move(cand));
          ++accepted;
        }
      }
      diag.rejected_empty += counters.rejected_empty;
      diag.rejected_sparse += counters.rejected_sparse;
      diag.rejected_mfe += counters.rejected_mfe;
      if (log) {
        (*log) << "[iter " << iteration << "] frame=" << frame_label
               << " family=" << to_string(family);
        if (helical) (*log) << " n=" << n;
        (*log) << " points=" << pts.cols() << " peaks=" << peaks.size()
               << " validated=" << accepted << '\n';
      }
    }
  }

  // Joint overlap resolution: each contested point goes to the candidate with
  // the lower segment MFE (ties to the earlier candidate, i.e. lower-dimension
  // family / higher peak).
  std::vector<int> owner(static_cast<std::size_t>(pts.cols()), -1);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    for (const int p : candidates[c].claim) {
      const int cur = owner[static_cast<std::size_t>(p)];
      if (cur < 0 || candidates[c].mfe < candidates[static_cast<std::size_t>(cur)].mfe) {
        owner[static_cast<std::size_t>(p)] = static_cast<int>(c);
      }
    }
  }
  std::vector<std::vector<int>> final_claims(candidates.size());
  for (std::size_t p = 0; p < owner.size(); ++p) {
    if (owner[p] >= 0) final_claims[static_cast<std::size_t>(owner[p])].push_back(static_cast<int>(p));
  }

  std::vector<FrameSegment> segments;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    auto& claim = final_claims[c];
    if (static_cast<int>(claim.size()) < config.dbscan_min_pts) {
      if (!candidates[c].claim.empty()) ++diag.rejected_empty;
      continue;
    }
    FrameSegment seg;
    seg.instance = candidates[c].instance;
    seg.positions = std::move(claim);
    Points3 cpts(3, static_cast<Index>(seg.positions.size()));
    for (std::size_t i = 0; i < seg.positions.size(); ++i) {
      cpts.col(static_cast<Index>(i)) = pts.col(seg.positions[i]);
    }
    // Re-validate on the points the candidate actually keeps: losing its
    // contested points to better-fitting candidates can leave an accidental
    // candidate with scattered leftovers that no longer pass the gates.
    seg.mfe = mean_fitting_error(seg.instance, cpts, config.workers);
    if (!(seg.mfe <= config.mfe_accept)) {
      ++diag.rejected_mfe;
      continue;
    }
    if (mean_knn_spacing(cpts, 10) > config.sparsity_factor * ctx.cloud_spacing) {
      ++diag.rejected_sparse;
      continue;
    }
    seg.frame_widths = candidates[c].frame_widths;
    segments.push_back(std::move(seg));
  }
  return segments;
}

PointCloud make_subcloud(const PointCloud& base, const std::vector<Index>& idx) {
  PointCloud out;
  out.points.resize(3, static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.points.col(static_cast<Index>(i)) = base.points.col(idx[i]);
  return out;
}

}  // namespace

PipelineConfig PipelineConfig::noisy() {
  PipelineConfig c;
  c.eps_fraction = 0.03;
  c.mfe_accept = 0.05;
  c.knn_normals = 40;
  return c;
}

double mean_fitting_error(const PrimitiveInstance& instance, const Points3& points, int workers) {
  if (points.cols() == 0) return std::numeric_limits<double>::infinity();
  const double diag = Aabb::of(points).diagonal();
  if (!(diag > 0.0)) return std::numeric_limits<double>::infinity();
  return distances(instance, points, workers).mean() / diag;
}

Preprocessed preprocess(const PointCloud& cloud, const PipelineConfig& config) {
  if (cloud.size() < 2) throw InvalidInput("preprocess: need at least two points");
  Preprocessed out;
  TransformedCloud centred = barycenter_center(cloud);
  out.stack.push(centred.back);
  const int k = std::min<int>(config.knn_normals, static_cast<int>(centred.cloud.size()) - 1);
  if (k < 3) throw InvalidInput("preprocess: too few points for normal estimation");
  PointCloud with_normals = estimate_normals(centred.cloud, k, config.workers);
  try {
    const Vec3 dominant = dominant_normal_direction(with_normals);
    TransformedCloud aligned = align_direction_to_z(with_normals, dominant);
    out.stack.push(aligned.back);
    with_normals = std::move(aligned.cloud);
  } catch (const NoDominantDirection&) {
    // No reliable normal anywhere: keep the original orientation.
  }
  TransformedCloud scaled = scale_to_unit_cube(with_normals);
  out.stack.push(scaled.back);
  out.cloud = std::move(scaled.cloud);
  return out;
}

RecognitionResult run_pipeline(const PointCloud& cloud, const PipelineConfig& config,
                               std::ostream* log) {
  RecognitionResult result;
  result.input_id = cloud.id;
  result.config = config;
  result.input_diagonal = cloud.bounds().diagonal();

  Preprocessed pre = preprocess(cloud, config);
  const SimilarityTransform to_world = pre.stack.to_original();
  const Index n = pre.cloud.size();

  FrameContext ctx;
  ctx.eps = config.eps_fraction * pre.cloud.bounds().diagonal();
  ctx.cloud_spacing = mean_knn_spacing(pre.cloud.points, 10);

  std::vector<char> claimed(static_cast<std::size_t>(n), 0);
  struct Pending {
    PrimitiveInstance world_instance;
    std::vector<Index> indices;
    double mfe;
    int iteration;
    std::map<std::string, double> frame_widths;
  };
  std::vector<Pending> pending;

  auto book = [&](const FrameSegment& seg, const std::vector<Index>& frame_to_orig,
                  const SimilarityTransform& frame_to_world, int iteration) {
    Pending p;
    p.world_instance = seg.instance;
    p.world_instance.pose = frame_to_world * seg.instance.pose;
    p.indices.reserve(seg.positions.size());
    for (const int pos : seg.positions) {
      const Index orig = frame_to_orig[static_cast<std::size_t>(pos)];
      p.indices.push_back(orig);
      claimed[static_cast<std::size_t>(orig)] = 1;
    }
    std::sort(p.indices.begin(), p.indices.end());
    p.mfe = seg.mfe;
    p.iteration = iteration;
    p.frame_widths = seg.frame_widths;
    pending.push_back(std::move(p));
  };

  // Round 1: global recognition over the whole preprocessed cloud.
  {
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    const auto segs =
        recognition_step(pre.cloud.points, config, ctx, result.diagnostics, log, "global", 1);
    for (const auto& seg : segs) book(seg, all, to_world, 1);
    result.diagnostics.iterations_run = 1;
  }

  // Residual iterations: cluster what is left, move each cluster into
  // standard position and recognize there.
  for (int iter = 2; iter <= config.max_iterations; ++iter) {
    std::vector<Index> residual;
    for (Index i = 0; i < n; ++i) {
      if (!claimed[static_cast<std::size_t>(i)]) residual.push_back(i);
    }
    if (static_cast<int>(residual.size()) < config.dbscan_min_pts) break;
    const PointCloud res_cloud = make_subcloud(pre.cloud, residual);
    const double res_spacing = mean_knn_spacing(res_cloud.points, 10);
    if (res_spacing > config.sparsity_factor * ctx.cloud_spacing) break;

    const auto clusters = dbscan_clusters(
        res_cloud.points, config.dbscan_radius_factor * res_spacing, config.dbscan_min_pts);
    std::size_t new_segments = 0;

    for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
      // Original indices of this cluster, in ascending order.
      std::vector<Index> orig;
      orig.reserve(clusters[ci].size());
      for (const Index r : clusters[ci]) orig.push_back(residual[static_cast<std::size_t>(r)]);

      PointCloud cluster = make_subcloud(pre.cloud, orig);
      const int k = std::min<int>(config.knn_normals, static_cast<int>(cluster.size()) - 1);
      if (k < 3) continue;
      cluster = estimate_normals(cluster, k, config.workers);

      const std::string label = "cluster" + std::to_string(ci);
      const auto recognize_in = [&](const PointCloud& part, const std::vector<Index>& part_orig) {
        const auto t = estimate_standard_form(part);
        if (!t) return false;
        const Points3 moved = t->apply(part.points);
        const auto segs = recognition_step(moved, config, ctx, result.diagnostics, log,
                                           label, iter);
        for (const auto& seg : segs) book(seg, part_orig, to_world * t->inverse(), iter);
        new_segments += segs.size();
        return true;
      };

      if (!recognize_in(cluster, orig)) {
        // Standard-form estimation failed: split by simplified RANSAC and try
        // each part once (parts that fail again stay unsegmented).
        ++result.diagnostics.fallback_clusters;
        const std::uint64_t salt = static_cast<std::uint64_t>(orig.front()) * 1000003ULL +
                                   static_cast<std::uint64_t>(iter);
        const auto parts = fallback_oversegment(cluster, config, salt);
        // A single part covering the whole cluster would just fail again.
        if (parts.size() == 1 && parts.front().size() == static_cast<std::size_t>(cluster.size())) {
          continue;
        }
        for (const auto& part : parts) {
          if (static_cast<int>(part.size()) < config.dbscan_min_pts) continue;
          std::vector<Index> part_orig;
          part_orig.reserve(part.size());
          for (const Index j : part) part_orig.push_back(orig[static_cast<std::size_t>(j)]);
          PointCloud sub = make_subcloud(pre.cloud, part_orig);
          const int ks = std::min<int>(config.knn_normals, static_cast<int>(sub.size()) - 1);
          if (ks < 3) continue;
          sub = estimate_normals(sub, ks, config.workers);
          recognize_in(sub, part_orig);
        }
      }
    }
    result.diagnostics.iterations_run = iter;
    if (new_segments == 0) break;
  }

  // Assemble final records in discovery order.
  for (std::size_t i = 0; i < pending.size(); ++i) {
    SegmentRecord rec;
    rec.id = static_cast<int>(i);
    rec.instance = std::move(pending[i].world_instance);
    rec.point_indices = std::move(pending[i].indices);
    rec.mfe = pending[i].mfe;
    rec.iteration = pending[i].iteration;
    const auto& names = family_spec(rec.instance.family).param_names;
    for (int d = 0; d < static_cast<int>(names.size()); ++d) {
      const auto it = pending[i].frame_widths.find(names[static_cast<std::size_t>(d)]);
      if (it == pending[i].frame_widths.end()) continue;
      const double factor = param_is_length(rec.instance.family, d) ? rec.instance.pose.scale : 1.0;
      rec.cell_widths[it->first] = it->second * factor;
    }
    result.segments.push_back(std::move(rec));
  }
  for (Index i = 0; i < n; ++i) {
    if (!claimed[static_cast<std::size_t>(i)]) result.unsegmented.push_back(i);
  }
  if (log) {
    (*log) << "[done] segments=" << result.segments.size()
           << " unsegmented=" << result.unsegmented.size()
           << " iterations=" << result.diagnostics.iterations_run << '\n';
  }
  return result;
}

}  // namespace primht
