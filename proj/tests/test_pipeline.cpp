#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "primht/pipeline.hpp"
#include "primht/surface_distance.hpp"

#include <Eigen/Geometry>

#include <random>
#include <set>
#include <sstream>

using namespace primht;

namespace {

SimilarityTransform posed(const Vec3& axis_to, const Vec3& shift) {
  SimilarityTransform t;
  t.rotation = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), axis_to.normalized())
                   .toRotationMatrix();
  t.translation = shift;
  return t;
}

PrimitiveInstance instance_of(FamilyId family, std::initializer_list<double> params,
                              const SimilarityTransform& pose) {
  PrimitiveInstance inst;
  inst.family = family;
  inst.params = Eigen::Map<const Eigen::VectorXd>(params.begin(),
                                                  static_cast<Index>(params.size()));
  inst.pose = pose;
  return inst;
}

PointCloud concat(const PointCloud& a, const PointCloud& b) {
  PointCloud out;
  out.points.resize(3, a.size() + b.size());
  out.points << a.points, b.points;
  return out;
}

double intrinsic_of(const PrimitiveInstance& inst, const std::string& key) {
  for (const auto& [name, value] : describe(inst).intrinsic) {
    if (name == key) return value;
  }
  FAIL("missing intrinsic ", key);
  return 0.0;
}

void require_identical(const RecognitionResult& a, const RecognitionResult& b) {
  REQUIRE(a.segments.size() == b.segments.size());
  CHECK(a.unsegmented == b.unsegmented);
  for (std::size_t i = 0; i < a.segments.size(); ++i) {
    const SegmentRecord& sa = a.segments[i];
    const SegmentRecord& sb = b.segments[i];
    CHECK(sa.id == sb.id);
    CHECK(sa.instance.family == sb.instance.family);
    CHECK((sa.instance.params - sb.instance.params).cwiseAbs().maxCoeff() == 0.0);
    CHECK((sa.instance.pose.rotation - sb.instance.pose.rotation).cwiseAbs().maxCoeff() == 0.0);
    CHECK((sa.instance.pose.translation - sb.instance.pose.translation).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK(sa.instance.pose.scale == sb.instance.pose.scale);
    CHECK(sa.point_indices == sb.point_indices);
    CHECK(sa.mfe == sb.mfe);
    CHECK(sa.iteration == sb.iteration);
    CHECK(sa.cell_widths == sb.cell_widths);
  }
}

}  // namespace

TEST_CASE("mean_fitting_error: slab oracle, exact surface, degenerate input") {
  // 5x5x5 grid filling the unit cube against its mid-plane z = 0.5: the mean
  // |z - 0.5| over the grid levels {0, .25, .5, .75, 1} is 0.3, the diagonal
  // sqrt(3).
  Points3 grid(3, 125);
  Index col = 0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      for (int k = 0; k < 5; ++k) grid.col(col++) = Vec3(i, j, k) * 0.25;
  const auto midplane = instance_of(FamilyId::kPlane, {0.5}, SimilarityTransform{});
  CHECK(mean_fitting_error(midplane, grid) == doctest::Approx(0.3 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(mean_fitting_error(midplane, grid, 4) == mean_fitting_error(midplane, grid, 1));

  const auto ball = instance_of(FamilyId::kSphere, {0.4}, posed(Vec3(1, 2, 3), Vec3(0.1, 0, 0)));
  const PointCloud on_surface = sample_surface(ball, 20, 15);
  CHECK(mean_fitting_error(ball, on_surface.points) < 1e-12);

  CHECK(std::isinf(mean_fitting_error(midplane, Points3(3, 0))));
  CHECK(std::isinf(mean_fitting_error(midplane, Points3::Zero(3, 5))));
}

TEST_CASE("preprocess: unit cube, round trip, dominant alignment, validation") {
  const Vec3 normal = Vec3(0.4, -0.2, 1.0).normalized();
  const auto plane = instance_of(FamilyId::kPlane, {0.0}, posed(normal, Vec3(3, -1, 2)));
  const auto ball =
      instance_of(FamilyId::kSphere, {0.2}, posed(Vec3::UnitZ(), Vec3(3, -1, 2.8)));
  const PointCloud cloud = concat(sample_surface(plane, 20, 20), sample_surface(ball, 10, 10));

  PipelineConfig config;
  const Preprocessed pre = preprocess(cloud, config);

  // Geometry: bbox centred in [-0.5, 0.5]^3 with unit longest side.
  const Aabb box = pre.cloud.bounds();
  CHECK(box.lo.minCoeff() >= -0.5 - 1e-9);
  CHECK(box.hi.maxCoeff() <= 0.5 + 1e-9);
  CHECK((box.hi - box.lo).maxCoeff() == doctest::Approx(1.0).epsilon(1e-9));

  // Round trip back to the input frame.
  const Points3 back = pre.stack.to_original().apply(pre.cloud.points);
  CHECK((back - cloud.points).cwiseAbs().maxCoeff() < 1e-9);

  // Normals estimated, and the dominant (plane) direction sits on z.
  REQUIRE(pre.cloud.has_normals());
  double align = 0.0;
  for (Index i = 0; i < 400; ++i) align += std::abs(pre.cloud.normals.col(i).z());
  CHECK(align / 400 > 0.99);

  PointCloud one;
  one.points = Points3::Zero(3, 1);
  CHECK_THROWS_AS(preprocess(one, config), InvalidInput);
  PointCloud three;
  three.points = Points3::Random(3, 3);
  CHECK_THROWS_AS(preprocess(three, config), InvalidInput);
}

TEST_CASE("run_pipeline recovers single primitives") {
  struct Case {
    PrimitiveInstance truth;
    int nu, nv;
    int expect_iteration;
    const char* radius_key;  // nullptr: verify by residual distance only
    double radius_truth;
  };
  const std::vector<Case> cases = {
      {instance_of(FamilyId::kPlane, {0.2}, posed(Vec3(0.3, 0.1, 1), Vec3(1, 2, 3))), 25, 25, 1,
       nullptr, 0.0},
      {instance_of(FamilyId::kSphere, {0.35}, posed(Vec3::UnitZ(), Vec3(0.4, -0.3, 0.9))), 26, 20,
       1, "r", 0.35},
      {instance_of(FamilyId::kCylinder, {0.3}, posed(Vec3(1, 0.4, 0.8), Vec3(-0.2, 0.5, 0.1))),
       40, 16, 2, "r", 0.3},
      // A torus alone dominates the normal vote with its own axis (the
      // u-grid concentrates normals at the poles), so it standardizes in the
      // global frame already.
      {instance_of(FamilyId::kTorus, {0.5, 0.15}, posed(Vec3(0.2, -0.3, 1), Vec3(2, 0, -1))), 24,
       30, 1, "R", 0.5},
  };
  for (const auto& c : cases) {
    CAPTURE(to_string(c.truth.family));
    const PointCloud cloud = sample_surface(c.truth, c.nu, c.nv);
    PipelineConfig config;
    config.families = {c.truth.family};
    const RecognitionResult result = run_pipeline(cloud, config);

    REQUIRE(result.segments.size() == 1);
    const SegmentRecord& seg = result.segments[0];
    CHECK(seg.instance.family == c.truth.family);
    CHECK(seg.iteration == c.expect_iteration);
    CHECK(static_cast<double>(seg.point_indices.size()) >= 0.95 * cloud.size());
    CHECK(static_cast<double>(result.unsegmented.size()) <= 0.05 * cloud.size());
    // Clean-scene MFE reflects cell quantization only; well under the 0.006
    // clean acceptance gate.
    CHECK(seg.mfe <= 0.006);

    // The recovered surface explains the cloud in the input frame.
    CHECK(mean_fitting_error(seg.instance, cloud.points) <= 0.006);

    if (c.radius_key != nullptr) {
      const double got = intrinsic_of(seg.instance, c.radius_key);
      const double width = seg.cell_widths.at(c.radius_key);
      CHECK(std::abs(got - c.radius_truth) <=
            std::max(width, 0.01 * c.radius_truth) + 1e-12);
    }
  }
}

TEST_CASE("run_pipeline: plane found globally, offset sphere in a residual round") {
  const Vec3 normal = Vec3(0.1, -0.2, 1.0).normalized();
  const auto plane = instance_of(FamilyId::kPlane, {0.0}, posed(normal, Vec3(0, 0, 0)));
  const auto ball = instance_of(FamilyId::kSphere, {0.22}, posed(Vec3::UnitZ(), Vec3(0.55, 0.4, 0.45)));
  const PointCloud cloud = concat(sample_surface(plane, 24, 24), sample_surface(ball, 22, 16));

  PipelineConfig config;
  config.families = {FamilyId::kPlane, FamilyId::kSphere};
  const RecognitionResult result = run_pipeline(cloud, config);

  REQUIRE(result.segments.size() == 2);
  const SegmentRecord* plane_seg = nullptr;
  const SegmentRecord* ball_seg = nullptr;
  for (const auto& seg : result.segments) {
    if (seg.instance.family == FamilyId::kPlane) plane_seg = &seg;
    if (seg.instance.family == FamilyId::kSphere) ball_seg = &seg;
  }
  REQUIRE(plane_seg != nullptr);
  REQUIRE(ball_seg != nullptr);
  CHECK(plane_seg->iteration == 1);
  CHECK(ball_seg->iteration >= 2);
  CHECK(static_cast<double>(plane_seg->point_indices.size()) >= 0.9 * 576);
  CHECK(static_cast<double>(ball_seg->point_indices.size()) >= 0.9 * 352);
  CHECK(intrinsic_of(ball_seg->instance, "r") ==
        doctest::Approx(0.22).epsilon(0.02));

  // Claims are disjoint.
  std::set<Index> seen;
  for (const auto& seg : result.segments) seen.insert(seg.point_indices.begin(), seg.point_indices.end());
  CHECK(seen.size() == plane_seg->point_indices.size() + ball_seg->point_indices.size());
}

TEST_CASE("run_pipeline tolerates background clutter") {
  const auto cyl = instance_of(FamilyId::kCylinder, {0.25}, posed(Vec3(0.3, 1, 0.5), Vec3(0, 0, 0)));
  PointCloud cloud = sample_surface(cyl, 36, 16);
  const Index n_shape = cloud.size();
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> un(-0.9, 0.9);
  PointCloud noise;
  noise.points.resize(3, 30);
  for (Index i = 0; i < 30; ++i) noise.points.col(i) = Vec3(un(rng), un(rng), un(rng));
  cloud = concat(cloud, noise);

  PipelineConfig config;
  config.families = {FamilyId::kCylinder};
  const RecognitionResult result = run_pipeline(cloud, config);
  REQUIRE(!result.segments.empty());
  const auto& seg = result.segments[0];
  CHECK(seg.instance.family == FamilyId::kCylinder);
  CHECK(static_cast<double>(seg.point_indices.size()) >= 0.9 * static_cast<double>(n_shape));
  CHECK(intrinsic_of(seg.instance, "r") == doctest::Approx(0.25).epsilon(0.02));
}

TEST_CASE("run_pipeline is deterministic and worker-count independent") {
  const auto plane = instance_of(FamilyId::kPlane, {0.1}, posed(Vec3(0.2, 0.4, 1), Vec3(1, 1, 1)));
  const auto ball = instance_of(FamilyId::kSphere, {0.2}, posed(Vec3::UnitZ(), Vec3(1.5, 1.4, 1.5)));
  const PointCloud cloud = concat(sample_surface(plane, 22, 22), sample_surface(ball, 18, 14));

  PipelineConfig config;
  config.families = {FamilyId::kPlane, FamilyId::kSphere};
  const RecognitionResult a = run_pipeline(cloud, config);
  const RecognitionResult b = run_pipeline(cloud, config);
  require_identical(a, b);

  PipelineConfig wide = config;
  wide.workers = 4;
  const RecognitionResult c = run_pipeline(cloud, wide);
  require_identical(a, c);
}

TEST_CASE("run_pipeline diagnostics and log stream") {
  const auto ball = instance_of(FamilyId::kSphere, {0.3}, posed(Vec3::UnitZ(), Vec3::Zero()));
  const PointCloud cloud = sample_surface(ball, 24, 18);
  PipelineConfig config;
  config.families = {FamilyId::kSphere};
  std::ostringstream log;
  const RecognitionResult result = run_pipeline(cloud, config, &log);
  CHECK(result.diagnostics.iterations_run >= 1);
  CHECK(result.diagnostics.candidates > 0);
  CHECK(result.input_diagonal == doctest::Approx(cloud.bounds().diagonal()));
  const std::string text = log.str();
  CHECK(text.find("[iter 1] frame=global family=sphere") != std::string::npos);
  CHECK(text.find("[done] segments=") != std::string::npos);
}

TEST_CASE("noisy preset loosens the gates") {
  const PipelineConfig base;
  const PipelineConfig noisy = PipelineConfig::noisy();
  CHECK(noisy.eps_fraction > base.eps_fraction);
  CHECK(noisy.mfe_accept > base.mfe_accept);
  CHECK(noisy.knn_normals > base.knn_normals);
}
