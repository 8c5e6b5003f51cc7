#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "primht/benchkit.hpp"
#include "primht/surface_distance.hpp"

#include <Eigen/Geometry>

#include <random>
#include <set>

using namespace primht;

namespace {

PrimitiveInstance instance_of(FamilyId family, std::initializer_list<double> params,
                              const Vec3& axis_to = Vec3::UnitZ(),
                              const Vec3& shift = Vec3::Zero()) {
  PrimitiveInstance inst;
  inst.family = family;
  inst.params = Eigen::Map<const Eigen::VectorXd>(params.begin(),
                                                  static_cast<Index>(params.size()));
  inst.pose.rotation = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), axis_to.normalized())
                           .toRotationMatrix();
  inst.pose.translation = shift;
  return inst;
}

ScenePatch patch_of(PrimitiveInstance inst, int count) {
  ScenePatch p;
  p.instance = std::move(inst);
  p.count = count;
  return p;
}

SegmentRecord claim(int id, std::vector<Index> indices, double mfe = 0.0) {
  SegmentRecord seg;
  seg.id = id;
  seg.point_indices = std::move(indices);
  seg.mfe = mfe;
  return seg;
}

std::vector<Index> iota_range(Index lo, Index hi) {
  std::vector<Index> out;
  for (Index i = lo; i < hi; ++i) out.push_back(i);
  return out;
}

/// From-scratch reimplementation of the scoring contract.
MetricsReport oracle_score(const RecognitionResult& result, const GroundTruth& gt) {
  const long n = static_cast<long>(gt.labels.size());
  MetricsReport report;
  std::vector<const SegmentRecord*> active;
  for (const auto& seg : result.segments) {
    if (seg.merged_into < 0) active.push_back(&seg);
  }
  if (!active.empty()) {
    report.mfe_min = report.mfe_max = active.front()->mfe;
    for (const auto* seg : active) {
      report.mfe_min = std::min(report.mfe_min, seg->mfe);
      report.mfe_max = std::max(report.mfe_max, seg->mfe);
      report.mfe_mean += seg->mfe / static_cast<double>(active.size());
    }
  }
  for (const int label : gt.label_set()) {
    long n_pos = 0;
    for (const int l : gt.labels) n_pos += l == label ? 1 : 0;
    const SegmentRecord* best = nullptr;
    long best_overlap = 0;
    for (const auto* seg : active) {
      long overlap = 0;
      for (const Index idx : seg->point_indices) {
        if (idx < n && gt.labels[static_cast<std::size_t>(idx)] == label) ++overlap;
      }
      if (overlap > best_overlap ||
          (overlap == best_overlap && overlap > 0 && best && seg->id < best->id)) {
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
    const auto rate = [](long a, long b) { return b == 0 ? 0.0 : double(a) / double(b); };
    s.dsc = rate(2 * s.tp, 2 * s.tp + s.fp + s.fn);
    s.ppv = rate(s.tp, s.tp + s.fp);
    s.tpr = rate(s.tp, s.tp + s.fn);
    s.npv = rate(s.tn, s.tn + s.fn);
    s.tnr = rate(s.tn, s.tn + s.fp);
    s.acc = rate(s.tp + s.tn, n);
    report.per_segment.push_back(s);
  }
  for (const auto& s : report.per_segment) {
    const double k = static_cast<double>(report.per_segment.size());
    report.dsc += s.dsc / k;
    report.ppv += s.ppv / k;
    report.tpr += s.tpr / k;
    report.npv += s.npv / k;
    report.tnr += s.tnr / k;
    report.acc += s.acc / k;
  }
  return report;
}

}  // namespace

TEST_CASE("generate: zero-noise samples lie on the surfaces, labelled per patch") {
  SceneSpec spec;
  spec.id = "two-shapes";
  spec.patches.push_back(patch_of(instance_of(FamilyId::kSphere, {0.4}, Vec3::UnitZ(), Vec3(1, 0, 0)), 200));
  spec.patches.push_back(patch_of(instance_of(FamilyId::kPlane, {0.0}), 150));
  const auto [cloud, gt] = generate(spec);

  CHECK(cloud.id == "two-shapes");
  REQUIRE(cloud.size() == 350);
  REQUIRE(gt.labels.size() == 350);
  for (Index i = 0; i < 200; ++i) {
    CHECK(gt.labels[static_cast<std::size_t>(i)] == 0);
    CHECK(distance_ex(spec.patches[0].instance, cloud.points.col(i)).distance < 1e-9);
  }
  for (Index i = 200; i < 350; ++i) {
    CHECK(gt.labels[static_cast<std::size_t>(i)] == 1);
    CHECK(distance_ex(spec.patches[1].instance, cloud.points.col(i)).distance < 1e-9);
  }
  CHECK(gt.label_set() == std::vector<int>{0, 1});
  REQUIRE(gt.instance_for(0) != nullptr);
  CHECK(gt.instance_for(0)->family == FamilyId::kSphere);
  CHECK(gt.instance_for(7) == nullptr);
}

TEST_CASE("generate: gaussian noise has the half-normal mean offset") {
  SceneSpec spec;
  spec.patches.push_back(patch_of(instance_of(FamilyId::kPlane, {0.0}), 4000));
  spec.sigma = 0.05;
  spec.seed = 11;
  const auto [cloud, gt] = generate(spec);
  double mean = 0.0;
  for (Index i = 0; i < cloud.size(); ++i) mean += std::abs(cloud.points(2, i));
  mean /= static_cast<double>(cloud.size());
  // |z| of an N(0, sigma) perturbation: mean sigma * sqrt(2/pi).
  CHECK(mean == doctest::Approx(0.05 * std::sqrt(2.0 / M_PI)).epsilon(0.05));
}

TEST_CASE("generate: relative sigma scales with the clean diagonal") {
  SceneSpec spec;
  spec.patches.push_back(patch_of(instance_of(FamilyId::kSphere, {2.0}), 3000));
  const auto [clean_cloud, g0] = generate(spec);
  const double diag = clean_cloud.bounds().diagonal();

  spec.sigma = 0.01;
  spec.sigma_relative = true;
  spec.seed = 5;
  const auto [noisy_cloud, g1] = generate(spec);
  double mean = 0.0;
  for (Index i = 0; i < noisy_cloud.size(); ++i) {
    mean += std::abs(noisy_cloud.points.col(i).norm() - 2.0);
  }
  mean /= static_cast<double>(noisy_cloud.size());
  CHECK(mean == doctest::Approx(0.01 * diag * std::sqrt(2.0 / M_PI)).epsilon(0.08));
}

TEST_CASE("generate: deterministic per seed") {
  SceneSpec spec;
  spec.patches.push_back(patch_of(instance_of(FamilyId::kTorus, {0.6, 0.15}), 300));
  spec.sigma = 0.02;
  spec.outlier_fraction = 0.1;
  spec.seed = 42;
  const auto [a, ga] = generate(spec);
  const auto [b, gb] = generate(spec);
  CHECK((a.points - b.points).cwiseAbs().maxCoeff() == 0.0);
  CHECK(ga.labels == gb.labels);

  spec.seed = 43;
  const auto [c, gc] = generate(spec);
  CHECK((a.points - c.points).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("generate: outliers appended with label -1 inside the inflated box") {
  SceneSpec spec;
  spec.patches.push_back(patch_of(instance_of(FamilyId::kSphere, {0.5}), 400));
  spec.outlier_fraction = 0.2;
  spec.seed = 3;
  const auto [cloud, gt] = generate(spec);
  REQUIRE(cloud.size() == 500);  // 400 * 0.2 / 0.8 = 100 outliers
  const Aabb clean_box = Aabb::of(cloud.points.leftCols(400));
  const Vec3 center = clean_box.center();
  const Vec3 half = 0.5 * 1.2 * clean_box.sides();
  for (Index i = 400; i < 500; ++i) {
    CHECK(gt.labels[static_cast<std::size_t>(i)] == -1);
    const Vec3 d = (cloud.points.col(i) - center).cwiseAbs();
    CHECK((d.array() <= half.array() + 1e-12).all());
  }
  CHECK(gt.label_set() == std::vector<int>{0});
}

TEST_CASE("generate: holes exclude uv rectangles; full cover throws") {
  SceneSpec spec;
  ScenePatch patch = patch_of(instance_of(FamilyId::kPlane, {0.0}), 500);
  patch.holes.push_back({0.0, 0.5, 0.0, 0.5});  // in uv = xy for an identity plane
  spec.patches.push_back(patch);
  const auto [cloud, gt] = generate(spec);
  for (Index i = 0; i < cloud.size(); ++i) {
    const bool inside = cloud.points(0, i) >= 0.0 && cloud.points(0, i) <= 0.5 &&
                        cloud.points(1, i) >= 0.0 && cloud.points(1, i) <= 0.5;
    CHECK(!inside);
  }

  SceneSpec covered;
  ScenePatch full = patch_of(instance_of(FamilyId::kPlane, {0.0}), 10);
  full.holes.push_back({-1.0, 1.0, -1.0, 1.0});
  covered.patches.push_back(full);
  CHECK_THROWS_AS(generate(covered), InvalidInput);
}

TEST_CASE("generate: input validation") {
  SceneSpec spec;
  spec.patches.push_back(patch_of(instance_of(FamilyId::kSphere, {0.5}), 10));
  spec.sigma = -0.1;
  CHECK_THROWS_AS(generate(spec), InvalidInput);
  spec.sigma = 0.0;
  spec.outlier_fraction = 1.0;
  CHECK_THROWS_AS(generate(spec), InvalidInput);
  spec.outlier_fraction = 0.0;
  spec.patches[0].count = 0;
  CHECK_THROWS_AS(generate(spec), InvalidInput);
  spec.patches[0].count = 10;
  spec.patches[0].label = -5;
  CHECK_THROWS_AS(generate(spec), InvalidInput);
  spec.patches[0].label = -2;
  spec.patches[0].instance.params(0) = -1.0;  // inadmissible sphere
  CHECK_THROWS_AS(generate(spec), InvalidInput);
}

TEST_CASE("score: perfect segmentation scores 1 everywhere") {
  GroundTruth gt;
  gt.labels.assign(500, 0);
  std::fill(gt.labels.begin() + 200, gt.labels.end(), 1);
  RecognitionResult result;
  result.segments.push_back(claim(0, iota_range(0, 200), 0.001));
  result.segments.push_back(claim(1, iota_range(200, 500), 0.004));

  const MetricsReport report = score(result, gt);
  REQUIRE(report.per_segment.size() == 2);
  for (const auto& s : report.per_segment) {
    CHECK(s.dsc == 1.0);
    CHECK(s.ppv == 1.0);
    CHECK(s.tpr == 1.0);
    CHECK(s.npv == 1.0);
    CHECK(s.tnr == 1.0);
    CHECK(s.acc == 1.0);
  }
  CHECK(report.per_segment[0].matched == 0);
  CHECK(report.per_segment[1].matched == 1);
  CHECK(report.dsc == 1.0);
  CHECK(report.acc == 1.0);
  CHECK(report.mfe_min == 0.001);
  CHECK(report.mfe_max == 0.004);
  CHECK(report.mfe_mean == doctest::Approx(0.0025));
}

TEST_CASE("score: an even split yields DSC 2/3") {
  GroundTruth gt;
  gt.labels.assign(200, 0);
  RecognitionResult result;
  result.segments.push_back(claim(0, iota_range(0, 100)));
  result.segments.push_back(claim(1, iota_range(100, 200)));
  const MetricsReport report = score(result, gt);
  REQUIRE(report.per_segment.size() == 1);
  CHECK(report.per_segment[0].matched == 0);  // tie resolved to the earlier id
  CHECK(report.per_segment[0].dsc == doctest::Approx(2.0 / 3.0));
  CHECK(report.per_segment[0].tpr == doctest::Approx(0.5));
  CHECK(report.per_segment[0].ppv == 1.0);
}

TEST_CASE("score: unmatched labels, merged records, empty results") {
  GroundTruth gt;
  gt.labels = {0, 0, 0, 1, 1, -1};
  RecognitionResult result;
  result.segments.push_back(claim(0, {0, 1, 2}));
  auto replaced = claim(1, {3, 4});
  replaced.merged_into = 2;  // superseded by a union record that claims nothing here
  result.segments.push_back(replaced);

  const MetricsReport report = score(result, gt);
  REQUIRE(report.per_segment.size() == 2);
  CHECK(report.per_segment[0].matched == 0);
  CHECK(report.per_segment[1].matched == -1);  // its only claimer is inactive
  CHECK(report.per_segment[1].tp == 0);
  CHECK(report.per_segment[1].fn == 2);
  CHECK(report.per_segment[1].dsc == 0.0);

  const MetricsReport empty = score(RecognitionResult{}, gt);
  REQUIRE(empty.per_segment.size() == 2);
  CHECK(empty.per_segment[0].matched == -1);
  CHECK(empty.dsc == 0.0);
  CHECK(empty.mfe_mean == 0.0);
}

TEST_CASE("score matches the oracle on randomized claims") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> lab(-1, 2);
  std::uniform_real_distribution<double> un(0.0, 1.0);
  for (int round = 0; round < 6; ++round) {
    CAPTURE(round);
    GroundTruth gt;
    for (int i = 0; i < 300; ++i) gt.labels.push_back(lab(rng));
    RecognitionResult result;
    for (int s = 0; s < 4; ++s) {
      std::vector<Index> idx;
      for (Index i = 0; i < 300; ++i) {
        if (un(rng) < 0.25) idx.push_back(i);
      }
      auto seg = claim(s, std::move(idx), un(rng));
      if (s == 3 && round % 2 == 0) seg.merged_into = 99;
      result.segments.push_back(std::move(seg));
    }
    const MetricsReport got = score(result, gt);
    const MetricsReport want = oracle_score(result, gt);
    REQUIRE(got.per_segment.size() == want.per_segment.size());
    for (std::size_t i = 0; i < got.per_segment.size(); ++i) {
      CHECK(got.per_segment[i].gt_label == want.per_segment[i].gt_label);
      CHECK(got.per_segment[i].matched == want.per_segment[i].matched);
      CHECK(got.per_segment[i].tp == want.per_segment[i].tp);
      CHECK(got.per_segment[i].fp == want.per_segment[i].fp);
      CHECK(got.per_segment[i].fn == want.per_segment[i].fn);
      CHECK(got.per_segment[i].tn == want.per_segment[i].tn);
      CHECK(got.per_segment[i].dsc == doctest::Approx(want.per_segment[i].dsc).epsilon(1e-12));
      CHECK(got.per_segment[i].acc == doctest::Approx(want.per_segment[i].acc).epsilon(1e-12));
    }
    CHECK(got.dsc == doctest::Approx(want.dsc).epsilon(1e-12));
    CHECK(got.mfe_min == want.mfe_min);
    CHECK(got.mfe_max == want.mfe_max);
    CHECK(got.mfe_mean == doctest::Approx(want.mfe_mean).epsilon(1e-12));
  }
}

TEST_CASE("parameter_deviation: intrinsics, anchors and axes") {
  GroundTruth gt;
  gt.labels.assign(100, 0);
  std::fill(gt.labels.begin() + 50, gt.labels.end(), 1);
  gt.instances.emplace_back(0, instance_of(FamilyId::kSphere, {0.30}, Vec3::UnitZ(), Vec3(1, 0, 0)));
  gt.instances.emplace_back(1, instance_of(FamilyId::kCylinder, {0.20}, Vec3::UnitZ(), Vec3(0, 0, 0)));

  const double one_deg = M_PI / 180.0;
  RecognitionResult result;
  auto s0 = claim(0, iota_range(0, 50));
  s0.instance = instance_of(FamilyId::kSphere, {0.32}, Vec3::UnitZ(), Vec3(1, 0.01, 0));
  auto s1 = claim(1, iota_range(50, 100));
  s1.instance = instance_of(FamilyId::kCylinder, {0.21},
                            Vec3(std::sin(one_deg), 0, std::cos(one_deg)), Vec3(0.03, 0, 0.5));
  result.segments = {s0, s1};

  const auto devs = parameter_deviation(result, gt);
  REQUIRE(devs.size() == 2);

  CHECK(devs[0].family_match);
  std::map<std::string, double> d0(devs[0].deviations.begin(), devs[0].deviations.end());
  CHECK(d0.at("r") == doctest::Approx(0.02));
  CHECK(d0.at("center") == doctest::Approx(0.01));
  CHECK(d0.count("axis_angle") == 0);  // spheres have no axis

  CHECK(devs[1].family_match);
  std::map<std::string, double> d1(devs[1].deviations.begin(), devs[1].deviations.end());
  CHECK(d1.at("r") == doctest::Approx(0.01));
  CHECK(d1.at("axis_angle") == doctest::Approx(one_deg).epsilon(1e-9));
  // Offset projected off the truth axis: the z-shift is slide, only x counts.
  CHECK(d1.at("axis_offset") == doctest::Approx(0.03).epsilon(1e-9));

  // Family mismatch reports no numbers.
  result.segments[1].instance = instance_of(FamilyId::kSphere, {0.2});
  const auto devs2 = parameter_deviation(result, gt);
  CHECK(!devs2[1].family_match);
  CHECK(devs2[1].deviations.empty());
}

TEST_CASE("format_metrics lays out rows and the aggregate") {
  GroundTruth gt;
  gt.labels.assign(60, 0);
  std::fill(gt.labels.begin() + 30, gt.labels.end(), 1);
  RecognitionResult result;
  result.segments.push_back(claim(0, iota_range(0, 30), 0.002));
  result.segments.push_back(claim(1, iota_range(30, 60), 0.003));
  const std::string text = format_metrics(score(result, gt));
  CHECK(text.find("DSC") != std::string::npos);
  CHECK(text.find("TNR") != std::string::npos);
  CHECK(text.find("mean") != std::string::npos);
  CHECK(text.find("MFE min/mean/max:") != std::string::npos);
  CHECK(text.find("1.0000") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);  // header + 2 rows + mean + MFE
}
