#include "primht/benchkit.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace primht {
namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL + salt * 0xbf58476d1ce4e5b9ULL);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

bool in_hole(const ScenePatch& patch, double u, double v) {
  for (const auto& h : patch.holes) {
    if (u >= h[0] && u <= h[1] && v >= h[2] && v <= h[3]) return true;
  }
  return false;
}

double safe_rate(long num, long den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

const PrimitiveInstance* GroundTruth::instance_for(int label) const {
  for (const auto& [l, inst] : instances) {
    if (l == label) return &inst;
  }
  return nullptr;
}

std::vector<int> GroundTruth::label_set() const {
  std::set<int> s;
  for (const int l : labels) {
    if (l >= 0) s.insert(l);
  }
  return {s.begin(), s.end()};
}

std::pair<PointCloud, GroundTruth> generate(const SceneSpec& spec) {
  if (spec.sigma < 0.0) throw InvalidInput("generate: sigma must be >= 0");
  if (spec.outlier_fraction < 0.0 || spec.outlier_fraction >= 1.0) {
    throw InvalidInput("generate: outlier fraction must be in [0, 1)");
  }
  PointCloud cloud;
  cloud.id = spec.id;
  GroundTruth gt;

  // Clean surface samples first: noise needs the clean diagonal when sigma is
  // relative, so positions and noise are drawn in two per-patch passes from
  // independent streams.
  std::vector<Vec3> pts;
  std::vector<int> labels;
  for (std::size_t pi = 0; pi < spec.patches.size(); ++pi) {
    const ScenePatch& patch = spec.patches[pi];
    if (patch.count < 1) throw InvalidInput("generate: patch count must be >= 1");
    const auto& fam = family_spec(patch.instance.family);
    const auto u_dom = patch.u_domain[0] == patch.u_domain[1] ? fam.u_domain : patch.u_domain;
    const auto v_dom = patch.v_domain[0] == patch.v_domain[1] ? fam.v_domain : patch.v_domain;
    if (!admissible(patch.instance.family, patch.instance.params)) {
      throw InvalidInput("generate: inadmissible instance for " + to_string(patch.instance.family));
    }
    const int label = patch.label == -2 ? static_cast<int>(pi) : patch.label;
    if (label < 0) throw InvalidInput("generate: patch labels must be >= 0");
    if (!gt.instance_for(label)) gt.instances.emplace_back(label, patch.instance);

    std::mt19937_64 rng(mix_seed(spec.seed, pi + 1));
    std::uniform_real_distribution<double> uu(u_dom[0], u_dom[1]), vv(v_dom[0], v_dom[1]);
    for (int c = 0; c < patch.count; ++c) {
      double u = 0.0, v = 0.0;
      int attempts = 0;
      do {
        u = uu(rng);
        v = vv(rng);
        if (++attempts > 10000) throw InvalidInput("generate: holes cover the patch domain");
      } while (in_hole(patch, u, v));
      const Vec3 p = patch.instance.pose.apply(
          evaluate(patch.instance.family, patch.instance.params, u, v, patch.instance.helix_n));
      pts.push_back(p);
      labels.push_back(label);
    }
  }

  Points3 clean(3, static_cast<Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) clean.col(static_cast<Index>(i)) = pts[i];
  const double diag = pts.empty() ? 0.0 : Aabb::of(clean).diagonal();
  const double sigma = spec.sigma_relative ? spec.sigma * diag : spec.sigma;

  if (sigma > 0.0) {
    std::size_t offset = 0;
    for (std::size_t pi = 0; pi < spec.patches.size(); ++pi) {
      std::mt19937_64 rng(mix_seed(spec.seed, 0x1000 + pi + 1));
      std::normal_distribution<double> gauss(0.0, sigma);
      for (int c = 0; c < spec.patches[pi].count; ++c, ++offset) {
        clean.col(static_cast<Index>(offset)) += Vec3(gauss(rng), gauss(rng), gauss(rng));
      }
    }
  }

  std::size_t n_outliers = 0;
  if (spec.outlier_fraction > 0.0 && !pts.empty()) {
    n_outliers = static_cast<std::size_t>(std::llround(
        static_cast<double>(pts.size()) * spec.outlier_fraction / (1.0 - spec.outlier_fraction)));
  }
  cloud.points.resize(3, static_cast<Index>(pts.size() + n_outliers));
  cloud.points.leftCols(static_cast<Index>(pts.size())) = clean;
  if (n_outliers > 0) {
    Aabb box = Aabb::of(clean);
    const Vec3 center = box.center();
    const Vec3 half = 0.5 * 1.2 * box.sides();
    std::mt19937_64 rng(mix_seed(spec.seed, 0xABCDEF));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (std::size_t i = 0; i < n_outliers; ++i) {
      const Vec3 p = center + Vec3(unit(rng) * half.x(), unit(rng) * half.y(), unit(rng) * half.z());
      cloud.points.col(static_cast<Index>(pts.size() + i)) = p;
      labels.push_back(-1);
    }
  }
  gt.labels = std::move(labels);
  return {std::move(cloud), std::move(gt)};
}

MetricsReport score(const RecognitionResult& result, const GroundTruth& gt) {
  const long n = static_cast<long>(gt.labels.size());
  MetricsReport report;

  // Active output segments (a record replaced by a union is skipped).
  std::vector<const SegmentRecord*> active;
  for (const auto& seg : result.segments) {
    if (seg.merged_into < 0) active.push_back(&seg);
  }

  std::vector<double> mfes;
  for (const auto* seg : active) mfes.push_back(seg->mfe);
  if (!mfes.empty()) {
    report.mfe_min = *std::min_element(mfes.begin(), mfes.end());
    report.mfe_max = *std::max_element(mfes.begin(), mfes.end());
    report.mfe_mean = std::accumulate(mfes.begin(), mfes.end(), 0.0) /
                      static_cast<double>(mfes.size());
  }

  for (const int label : gt.label_set()) {
    std::vector<char> positive(static_cast<std::size_t>(n), 0);
    long n_pos = 0;
    for (long i = 0; i < n; ++i) {
      if (gt.labels[static_cast<std::size_t>(i)] == label) {
        positive[static_cast<std::size_t>(i)] = 1;
        ++n_pos;
      }
    }
    const SegmentRecord* best = nullptr;
    long best_overlap = 0;
    for (const auto* seg : active) {
      long overlap = 0;
      for (const Index idx : seg->point_indices) {
        if (idx < n && positive[static_cast<std::size_t>(idx)]) ++overlap;
      }
      if (overlap > best_overlap || (overlap == best_overlap && overlap > 0 && best &&
                                     seg->id < best->id)) {
        best = seg;
        best_overlap = overlap;
      }
    }
    SegmentScore s;
    s.gt_label = label;
    if (best && best_overlap > 0) {
      s.matched = best->id;
      s.tp = best_overlap;
      s.fp = static_cast<long>(best->point_indices.size()) - best_overlap;
      s.fn = n_pos - best_overlap;
      s.tn = n - s.tp - s.fp - s.fn;
    } else {
      s.fn = n_pos;
      s.tn = n - n_pos;
    }
    s.dsc = safe_rate(2 * s.tp, 2 * s.tp + s.fp + s.fn);
    s.ppv = safe_rate(s.tp, s.tp + s.fp);
    s.tpr = safe_rate(s.tp, s.tp + s.fn);
    s.npv = safe_rate(s.tn, s.tn + s.fn);
    s.tnr = safe_rate(s.tn, s.tn + s.fp);
    s.acc = safe_rate(s.tp + s.tn, n);
    report.per_segment.push_back(s);
  }
  if (!report.per_segment.empty()) {
    const double k = static_cast<double>(report.per_segment.size());
    for (const auto& s : report.per_segment) {
      report.dsc += s.dsc / k;
      report.ppv += s.ppv / k;
      report.tpr += s.tpr / k;
      report.npv += s.npv / k;
      report.tnr += s.tnr / k;
      report.acc += s.acc / k;
    }
  }
  return report;
}

std::vector<ParameterDeviation> parameter_deviation(const RecognitionResult& result,
                                                    const GroundTruth& gt) {
  const MetricsReport report = score(result, gt);
  std::map<int, const SegmentRecord*> by_id;
  for (const auto& seg : result.segments) by_id[seg.id] = &seg;

  std::vector<ParameterDeviation> out;
  for (const auto& s : report.per_segment) {
    ParameterDeviation dev;
    dev.gt_label = s.gt_label;
    dev.matched = s.matched;
    const PrimitiveInstance* truth = gt.instance_for(s.gt_label);
    if (s.matched < 0 || !truth) {
      out.push_back(std::move(dev));
      continue;
    }
    const SegmentRecord& seg = *by_id.at(s.matched);
    if (seg.instance.family != truth->family) {
      out.push_back(std::move(dev));
      continue;
    }
    dev.family_match = true;
    const GeometricDescriptor got = describe(seg.instance);
    const GeometricDescriptor want = describe(*truth);
    for (const auto& [name, value] : want.intrinsic) {
      for (const auto& [gname, gvalue] : got.intrinsic) {
        if (gname == name) dev.deviations.emplace_back(name, std::abs(gvalue - value));
      }
    }
    const FamilyId fam = truth->family;
    const Vec3 da = got.anchor - want.anchor;
    if (fam == FamilyId::kPlane) {
      // (n, k) and (-n, -k) describe the same plane; compare the sign
      // representative whose normal aligns with the ground truth.
      const double sign = got.axis.dot(want.axis) < 0.0 ? -1.0 : 1.0;
      dev.deviations.emplace_back("k", std::abs(sign * got.anchor.dot(got.axis) -
                                                want.anchor.dot(want.axis)));
    } else if (fam == FamilyId::kCone || fam == FamilyId::kNcxCone) {
      dev.deviations.emplace_back("apex", da.norm());
    } else if (fam == FamilyId::kSphere || fam == FamilyId::kTorus ||
               fam == FamilyId::kEllipsoid) {
      dev.deviations.emplace_back("center", da.norm());
    } else if (fam == FamilyId::kCylinder || fam == FamilyId::kNcxCylinder) {
      const Vec3 off = da - da.dot(want.axis) * want.axis;
      dev.deviations.emplace_back("axis_offset", off.norm());
    }
    if (fam != FamilyId::kSphere) {
      const double c = std::clamp(std::abs(got.axis.dot(want.axis)), 0.0, 1.0);
      dev.deviations.emplace_back("axis_angle", std::acos(c));
    }
    out.push_back(std::move(dev));
  }
  return out;
}

std::string format_metrics(const MetricsReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << std::setw(8) << "gt" << std::setw(8) << "match" << std::setw(9) << "DSC"
     << std::setw(9) << "PPV" << std::setw(9) << "TPR" << std::setw(9) << "NPV"
     << std::setw(9) << "TNR" << std::setw(9) << "ACC" << '\n';
  for (const auto& s : report.per_segment) {
    os << std::setw(8) << s.gt_label << std::setw(8) << s.matched << std::setw(9) << s.dsc
       << std::setw(9) << s.ppv << std::setw(9) << s.tpr << std::setw(9) << s.npv
       << std::setw(9) << s.tnr << std::setw(9) << s.acc << '\n';
  }
  os << std::setw(8) << "mean" << std::setw(8) << "" << std::setw(9) << report.dsc
     << std::setw(9) << report.ppv << std::setw(9) << report.tpr << std::setw(9) << report.npv
     << std::setw(9) << report.tnr << std::setw(9) << report.acc << '\n';
  os << "MFE min/mean/max: " << report.mfe_min << " / " << report.mfe_mean << " / "
     << report.mfe_max << '\n';
  return os.str();
}

}  // namespace primht
