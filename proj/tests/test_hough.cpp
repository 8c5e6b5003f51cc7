#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "primht/hough.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <queue>
#include <random>
#include <set>

using namespace primht;

namespace {

/// Naive voter: per point, dedup the locus cells through a std::set, then add
/// one vote each.  Shares only the locus solver with the library.
std::vector<std::uint32_t> naive_vote(const Points3& points, FamilyId family,
                                      const ParameterRegion& region, const HoughConfig& config) {
  REQUIRE(points.cols() <= 5000);
  REQUIRE(region.total_cells() <= 10'000);
  HtOptions opt = config.ht;
  for (int d : swept_dims(family)) {
    auto& sweep = opt.sweep[static_cast<std::size_t>(d)];
    if (sweep.empty()) {
      for (int c = 0; c < region.axes[static_cast<std::size_t>(d)].cells; ++c) {
        sweep.push_back(region.center_of(d, c));
      }
    }
  }
  std::vector<std::uint32_t> counts(static_cast<std::size_t>(region.total_cells()), 0);
  for (Index i = 0; i < points.cols(); ++i) {
    std::set<long> cells;
    for (const auto& s : solve_ht_sample(family, points.col(i), opt).samples) {
      std::vector<int> cell(static_cast<std::size_t>(region.dim()));
      bool inside = true;
      for (int a = 0; a < region.dim() && inside; ++a) {
        const int c = region.cell_of(a, s(a));
        if (c < 0) inside = false;
        cell[static_cast<std::size_t>(a)] = c;
      }
      if (inside) cells.insert(region.flatten(cell));
    }
    for (long f : cells) ++counts[static_cast<std::size_t>(f)];
  }
  return counts;
}

struct OraclePeak {
  long cell;
  std::uint32_t height;
  double persistence;
};

/// Exhaustive persistence oracle: recompute connected components of every
/// superlevel set from scratch (BFS), track births and elder-rule deaths.
std::vector<OraclePeak> oracle_peaks(const Accumulator& acc, double fraction) {
  const long M = acc.region.total_cells();
  std::set<std::uint32_t, std::greater<>> levels;
  std::uint32_t max_count = 0;
  for (long c = 0; c < M; ++c) {
    if (acc.counts[static_cast<std::size_t>(c)] > 0) {
      levels.insert(acc.counts[static_cast<std::size_t>(c)]);
      max_count = std::max(max_count, acc.counts[static_cast<std::size_t>(c)]);
    }
  }
  if (levels.empty()) return {};

  auto neighbours = [&](long flat) {
    std::vector<long> out;
    const auto multi = acc.region.unflatten(flat);
    long stride = 1;
    for (int d = acc.region.dim() - 1; d >= 0; --d) {
      const int cells_d = acc.region.axes[static_cast<std::size_t>(d)].cells;
      for (int delta : {-1, 1}) {
        const int nd = multi[static_cast<std::size_t>(d)] + delta;
        if (nd >= 0 && nd < cells_d) out.push_back(flat + delta * stride);
      }
      stride *= cells_d;
    }
    return out;
  };

  // Live components keyed by (birth_cell); value = birth count.
  std::map<long, std::uint32_t> live;
  std::vector<int> label(static_cast<std::size_t>(M), -1);  // component id per cell
  std::vector<long> comp_birth;                              // id -> birth cell
  std::vector<OraclePeak> deaths;

  for (std::uint32_t L : levels) {
    // Recompute components of {count >= L} from scratch.
    std::vector<int> fresh(static_cast<std::size_t>(M), -1);
    int next = 0;
    std::vector<std::vector<long>> members;
    for (long c = 0; c < M; ++c) {
      if (acc.counts[static_cast<std::size_t>(c)] < L || fresh[static_cast<std::size_t>(c)] >= 0)
        continue;
      members.emplace_back();
      std::queue<long> q;
      q.push(c);
      fresh[static_cast<std::size_t>(c)] = next;
      while (!q.empty()) {
        const long f = q.front();
        q.pop();
        members.back().push_back(f);
        for (long n : neighbours(f)) {
          if (acc.counts[static_cast<std::size_t>(n)] >= L && fresh[static_cast<std::size_t>(n)] < 0) {
            fresh[static_cast<std::size_t>(n)] = next;
            q.push(n);
          }
        }
      }
      ++next;
    }
    // Match old components into the new ones; elder survives, rest die at L.
    std::vector<long> new_birth(static_cast<std::size_t>(next), -1);
    for (int id = 0; id < next; ++id) {
      std::set<long> old_births;
      for (long f : members[static_cast<std::size_t>(id)]) {
        const int old = label[static_cast<std::size_t>(f)];
        if (old >= 0) old_births.insert(comp_birth[static_cast<std::size_t>(old)]);
      }
      if (old_births.empty()) {
        // Newborn plateau component: its first cell in flat order.
        long birth = *std::min_element(members[static_cast<std::size_t>(id)].begin(),
                                       members[static_cast<std::size_t>(id)].end());
        new_birth[static_cast<std::size_t>(id)] = birth;
        live[birth] = L;
        continue;
      }
      long elder = -1;
      for (long b : old_births) {
        if (elder < 0 || live[b] > live[elder] || (live[b] == live[elder] && b < elder)) elder = b;
      }
      for (long b : old_births) {
        if (b != elder) {
          deaths.push_back({b, live[b], static_cast<double>(live[b]) - static_cast<double>(L)});
          live.erase(b);
        }
      }
      new_birth[static_cast<std::size_t>(id)] = elder;
    }
    // Relabel for the next threshold.
    comp_birth.assign(new_birth.begin(), new_birth.end());
    for (long c = 0; c < M; ++c) label[static_cast<std::size_t>(c)] = fresh[static_cast<std::size_t>(c)];
  }
  for (const auto& [birth, count] : live) deaths.push_back({birth, count, static_cast<double>(count)});

  std::vector<OraclePeak> peaks;
  for (const auto& d : deaths) {
    if (d.persistence > fraction * max_count) peaks.push_back(d);
  }
  std::sort(peaks.begin(), peaks.end(), [](const OraclePeak& a, const OraclePeak& b) {
    return a.height > b.height || (a.height == b.height && a.cell < b.cell);
  });
  return peaks;
}

void check_peaks_match(const Accumulator& acc, double fraction) {
  const auto got = find_peaks(acc, fraction);
  const auto want = oracle_peaks(acc, fraction);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].flat == want[i].cell);
    CHECK(got[i].height == want[i].height);
    CHECK(got[i].persistence == doctest::Approx(want[i].persistence).epsilon(1e-12));
    CHECK((got[i].center - acc.region.cell_center(got[i].flat)).norm() == 0.0);
  }
}

Accumulator make_acc(std::vector<int> cells_per_axis, std::uint64_t seed, int max_value) {
  Accumulator acc;
  for (int n : cells_per_axis) acc.region.axes.push_back({0.0, 1.0, n, AxisScale::kLinear});
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> val(0, max_value);
  acc.counts.resize(static_cast<std::size_t>(acc.region.total_cells()));
  for (auto& c : acc.counts) c = static_cast<std::uint32_t>(val(rng));
  return acc;
}

Points3 cylinder_rings(double r, int n_angles, const std::vector<double>& zs, double phase = 0.0) {
  Points3 pts(3, static_cast<Index>(n_angles) * static_cast<Index>(zs.size()));
  Index col = 0;
  for (double z : zs) {
    for (int i = 0; i < n_angles; ++i) {
      const double a = phase + 2.0 * std::acos(-1.0) * i / n_angles;
      pts.col(col++) = Vec3(r * std::cos(a), r * std::sin(a), z);
    }
  }
  return pts;
}

}  // namespace

TEST_CASE("init_region: axes, bounds and cell counts per family") {
  Aabb box;
  box.lo = Vec3(-1, -1, -1);
  box.hi = Vec3(1, 1, 1);
  const double d = box.diagonal();
  CHECK(d == doctest::Approx(2.0 * std::sqrt(3.0)));
  HoughConfig config;

  for (const FamilyId f : kAllFamilies) {
    const ParameterRegion region = init_region(f, box, config);
    const auto& spec = family_spec(f);
    REQUIRE(region.dim() == spec.dim);
    const int expect_cells = spec.dim <= 2 ? config.cells_low_dim : config.cells_4d;
    for (const auto& ax : region.axes) {
      CHECK(ax.cells == expect_cells);
      CHECK(ax.lo < ax.hi);
    }
  }

  const auto plane = init_region(FamilyId::kPlane, box, config);
  CHECK(plane.axes[0].lo == doctest::Approx(-d / 2));
  CHECK(plane.axes[0].hi == doctest::Approx(d / 2));

  const auto sphere = init_region(FamilyId::kSphere, box, config);
  CHECK(sphere.axes[0].lo == doctest::Approx(d / 200));
  CHECK(sphere.axes[0].hi == doctest::Approx(d / 2));
  CHECK(sphere.axes[0].scale == AxisScale::kLinear);

  const auto cone = init_region(FamilyId::kCone, box, config);
  CHECK(cone.axes[0].scale == AxisScale::kLogAbs);
  CHECK(cone.axes[0].lo == doctest::Approx(-400.0));
  CHECK(cone.axes[0].hi == doctest::Approx(-0.01));
  CHECK(cone.axes[1].lo == doctest::Approx(-d));
  CHECK(cone.axes[1].hi == doctest::Approx(d));

  const auto ncx = init_region(FamilyId::kNcxCylinder, box, config);
  CHECK(ncx.axes[1].lo == doctest::Approx(-0.45));
  CHECK(ncx.axes[1].hi == doctest::Approx(0.45));
  CHECK(ncx.axes[1].scale == AxisScale::kLinear);

  const auto helsurf = init_region(FamilyId::kHelicalSurface, box, config);
  CHECK(helsurf.axes[0].cells == config.cells_4d);
  CHECK(helsurf.axes[2].lo == doctest::Approx(-d));
  CHECK(helsurf.axes[2].hi == doctest::Approx(d));
  CHECK(helsurf.total_cells() == static_cast<long>(config.cells_4d) * config.cells_4d *
                                     config.cells_4d * config.cells_4d);

  Aabb degenerate;
  degenerate.lo = degenerate.hi = Vec3(1, 2, 3);
  CHECK_THROWS_AS(init_region(FamilyId::kPlane, degenerate, config), InvalidInput);
}

TEST_CASE("ParameterRegion: linear axis cell mathematics") {
  ParameterRegion region;
  region.axes = {{-1.0, 1.0, 10, AxisScale::kLinear}};
  CHECK(region.total_cells() == 10);
  CHECK(region.cell_of(0, -1.0) == 0);
  CHECK(region.cell_of(0, -0.81) == 0);
  CHECK(region.cell_of(0, -0.79) == 1);
  CHECK(region.cell_of(0, 0.0) == 5);
  CHECK(region.cell_of(0, 1.0) == 9);  // upper edge belongs to the last cell
  CHECK(region.cell_of(0, 1.0001) == -1);
  CHECK(region.cell_of(0, -1.0001) == -1);
  for (int c = 0; c < 10; ++c) {
    CHECK(region.center_of(0, c) == doctest::Approx(-1.0 + 0.2 * c + 0.1));
    CHECK(region.width_of(0, c) == doctest::Approx(0.2));
    CHECK(region.cell_of(0, region.center_of(0, c)) == c);
  }
}

TEST_CASE("ParameterRegion: log-abs axis covers one sign, geometric widths") {
  ParameterRegion region;
  region.axes = {{-400.0, -0.01, 256, AxisScale::kLogAbs}};
  // Derived from first principles: |value| spans [0.01, 400], log-uniform.
  const double ratio = std::pow(400.0 / 0.01, 1.0 / 256.0);

  CHECK(region.cell_of(0, 0.0) == -1);
  CHECK(region.cell_of(0, 0.05) == -1);    // wrong sign
  CHECK(region.cell_of(0, -0.009) == -1);  // below the magnitude window
  CHECK(region.cell_of(0, -401.0) == -1);

  // Cell 0 holds the smallest magnitudes, cell 255 the largest.
  CHECK(region.cell_of(0, -0.0101) == 0);
  CHECK(region.cell_of(0, -399.0) == 255);
  CHECK(region.center_of(0, 0) == doctest::Approx(-0.01 * std::sqrt(ratio)).epsilon(1e-12));
  CHECK(region.center_of(0, 255) == doctest::Approx(-400.0 / std::sqrt(ratio)).epsilon(1e-12));
  for (int c : {0, 17, 100, 254}) {
    CHECK(region.width_of(0, c + 1) / region.width_of(0, c) == doctest::Approx(ratio));
    CHECK(region.cell_of(0, region.center_of(0, c)) == c);
    CHECK(region.center_of(0, c) < 0.0);
  }
  // Cell edges partition the interval: widths sum to the span.
  double sum = 0.0;
  for (int c = 0; c < 256; ++c) sum += region.width_of(0, c);
  CHECK(sum == doctest::Approx(400.0 - 0.01));
}

TEST_CASE("ParameterRegion: flatten and unflatten are inverse, row-major") {
  ParameterRegion region;
  region.axes = {{0, 1, 4, AxisScale::kLinear},
                 {0, 1, 3, AxisScale::kLinear},
                 {0, 1, 5, AxisScale::kLinear}};
  CHECK(region.total_cells() == 60);
  CHECK(region.flatten({0, 0, 0}) == 0);
  CHECK(region.flatten({0, 0, 1}) == 1);  // last axis varies fastest
  CHECK(region.flatten({0, 1, 0}) == 5);
  CHECK(region.flatten({1, 0, 0}) == 15);
  for (long flat = 0; flat < 60; ++flat) {
    const auto cell = region.unflatten(flat);
    CHECK(region.flatten(cell) == flat);
    const Eigen::VectorXd center = region.cell_center(flat);
    for (int d = 0; d < 3; ++d) {
      CHECK(center(d) == doctest::Approx(region.center_of(d, cell[static_cast<std::size_t>(d)])));
    }
  }
}

TEST_CASE("vote equals the naive per-point voter, cylinder radii") {
  Points3 pts(3, 900);
  pts << cylinder_rings(0.3, 60, {-0.4, -0.2, 0.0, 0.2, 0.4}),
      cylinder_rings(0.6, 60, {-0.4, -0.2, 0.0, 0.2, 0.4}, 0.01),
      cylinder_rings(0.9, 60, {-0.4, -0.2, 0.0, 0.2, 0.4}, 0.02);

  HoughConfig config;
  config.cells_low_dim = 200;
  Aabb box;
  box.lo = pts.rowwise().minCoeff();
  box.hi = pts.rowwise().maxCoeff();
  const ParameterRegion region = init_region(FamilyId::kCylinder, box, config);

  const Accumulator acc = vote(pts, FamilyId::kCylinder, region, config);
  const auto naive = naive_vote(pts, FamilyId::kCylinder, region, config);
  REQUIRE(acc.counts.size() == naive.size());
  CHECK(acc.counts == naive);
  CHECK(acc.total() == 900);  // every point votes its radius exactly once

  // Each radius lands in a single cell with the full 300 points.
  const auto peaks = find_peaks(acc, 0.10);
  REQUIRE(peaks.size() == 3);
  std::vector<double> radii;
  for (const auto& p : peaks) {
    CHECK(p.height == 300);
    radii.push_back(p.center(0));
  }
  std::sort(radii.begin(), radii.end());
  CHECK(std::abs(radii[0] - 0.3) <= 0.5 * region.width_of(0, 0));
  CHECK(std::abs(radii[1] - 0.6) <= 0.5 * region.width_of(0, 0));
  CHECK(std::abs(radii[2] - 0.9) <= 0.5 * region.width_of(0, 0));
}

TEST_CASE("vote equals the naive per-point voter, torus sweep") {
  PrimitiveInstance inst;
  inst.family = FamilyId::kTorus;
  inst.params = Eigen::Vector2d(0.30, 0.12);
  const PointCloud cloud = sample_surface(inst, 24, 30);

  // R = 0.30 sits exactly on a cell centre, so the solved r is exactly 0.12
  // for every point and the true cell collects all votes.
  ParameterRegion region;
  region.axes = {{0.045, 0.445, 40, AxisScale::kLinear}, {0.045, 0.445, 40, AxisScale::kLinear}};
  HoughConfig config;

  const Accumulator acc = vote(cloud.points, FamilyId::kTorus, region, config);
  const auto naive = naive_vote(cloud.points, FamilyId::kTorus, region, config);
  CHECK(acc.counts == naive);
  CHECK(acc.total() > 0);

  const auto peaks = find_peaks(acc, 0.10);
  REQUIRE(!peaks.empty());
  CHECK(std::abs(peaks[0].center(0) - 0.30) <= region.width_of(0, 0));
  CHECK(std::abs(peaks[0].center(1) - 0.12) <= region.width_of(1, 0));
  CHECK(peaks[0].height == 720);  // all points vote the true cell
}

TEST_CASE("vote deduplicates repeated sweep values within a point") {
  Points3 pts(3, 1);
  pts.col(0) = Vec3(0.3, 0.0, 0.1);  // on the torus (R=0.3, r=...) locus
  ParameterRegion region;
  region.axes = {{0.05, 0.5, 10, AxisScale::kLinear}, {0.01, 0.5, 10, AxisScale::kLinear}};
  HoughConfig config;
  // Three copies of the same sweep value must yield a single vote.
  config.ht.sweep[0] = {0.3, 0.3, 0.3};
  const Accumulator acc = vote(pts, FamilyId::kTorus, region, config);
  CHECK(acc.total() == 1);
  const auto naive = naive_vote(pts, FamilyId::kTorus, region, config);
  CHECK(acc.counts == naive);
}

TEST_CASE("vote is byte-identical across worker counts") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> un(-1, 1);
  Points3 pts(3, 2000);
  for (Index i = 0; i < pts.cols(); ++i) pts.col(i) = Vec3(un(rng), un(rng), un(rng));
  Aabb box;
  box.lo = pts.rowwise().minCoeff();
  box.hi = pts.rowwise().maxCoeff();

  for (const FamilyId f : {FamilyId::kPlane, FamilyId::kCone, FamilyId::kTorus}) {
    HoughConfig config;
    config.cells_low_dim = 64;
    const ParameterRegion region = init_region(f, box, config);
    config.workers = 1;
    const Accumulator one = vote(pts, f, region, config);
    config.workers = 4;
    const Accumulator four = vote(pts, f, region, config);
    config.workers = 8;
    const Accumulator eight = vote(pts, f, region, config);
    CHECK(one.counts == four.counts);
    CHECK(one.counts == eight.counts);
  }
}

TEST_CASE("vote refuses accumulators beyond the cell cap") {
  ParameterRegion region;
  region.axes = {{0.05, 0.5, 2000, AxisScale::kLinear}, {0.05, 0.5, 2000, AxisScale::kLinear}};
  HoughConfig config;
  config.max_cells = 1'000'000;  // 4e6 needed
  Points3 pts = Points3::Zero(3, 4);
  CHECK_THROWS_AS(vote(pts, FamilyId::kTorus, region, config), CapExceeded);
}

TEST_CASE("find_peaks equals the exhaustive persistence oracle") {
  // Handcrafted 1-D profile with a saddle.
  Accumulator acc;
  acc.region.axes = {{0, 1, 5, AxisScale::kLinear}};
  acc.counts = {0, 5, 3, 7, 1};
  auto peaks = find_peaks(acc, 0.10);
  REQUIRE(peaks.size() == 2);
  CHECK(peaks[0].flat == 3);
  CHECK(peaks[0].height == 7);
  CHECK(peaks[0].persistence == doctest::Approx(7.0));
  CHECK(peaks[1].flat == 1);
  CHECK(peaks[1].height == 5);
  CHECK(peaks[1].persistence == doctest::Approx(2.0));
  check_peaks_match(acc, 0.10);

  // The 0.3 fraction filters the saddle peak (2 <= 0.3 * 7).
  CHECK(find_peaks(acc, 0.30).size() == 1);

  // Plateau: one peak born at the first cell in flat order.
  acc.counts = {4, 4, 4, 0, 0};
  peaks = find_peaks(acc, 0.0);
  REQUIRE(peaks.size() == 1);
  CHECK(peaks[0].flat == 0);
  CHECK(peaks[0].persistence == doctest::Approx(4.0));
  check_peaks_match(acc, 0.0);

  // Empty accumulator.
  acc.counts = {0, 0, 0, 0, 0};
  CHECK(find_peaks(acc, 0.1).empty());

  // Randomized 1-D / 2-D / 3-D accumulators, two fractions each.
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    for (double fraction : {0.0, 0.15}) {
      check_peaks_match(make_acc({40}, seed, 12), fraction);
      check_peaks_match(make_acc({12, 12}, seed + 100, 9), fraction);
      check_peaks_match(make_acc({6, 7, 5}, seed + 200, 6), fraction);
    }
  }
}

TEST_CASE("peak_to_instance enforces admissibility at the cell centre") {
  Peak peak;
  peak.center = Eigen::Vector2d(0.1, 0.3);  // r > R: not a torus
  CHECK(!peak_to_instance(peak, FamilyId::kTorus).has_value());
  peak.center = Eigen::Vector2d(0.3, 0.1);
  const auto inst = peak_to_instance(peak, FamilyId::kTorus);
  REQUIRE(inst.has_value());
  CHECK(inst->family == FamilyId::kTorus);
  CHECK(inst->params(0) == doctest::Approx(0.3));
  CHECK(inst->pose.rotation.isIdentity(0.0));
  CHECK(inst->pose.scale == 1.0);
}

TEST_CASE("dump_accumulator: header plus little-endian counts") {
  Accumulator acc;
  acc.region.axes = {{-1.0, 1.0, 3, AxisScale::kLinear}, {-400.0, -0.01, 2, AxisScale::kLogAbs}};
  acc.counts = {1, 2, 3, 4, 5, 6};
  const auto path = std::filesystem::temp_directory_path() / "primht_test_acc.bin";
  dump_accumulator(acc, path);

  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  const auto doc = nlohmann::json::parse(header);
  CHECK(doc.at("dims") == 2);
  CHECK(doc.at("cells") == nlohmann::json({3, 2}));
  CHECK(doc.at("los")[0] == doctest::Approx(-1.0));
  CHECK(doc.at("his")[1] == doctest::Approx(-0.01));
  std::vector<std::uint32_t> counts(6);
  in.read(reinterpret_cast<char*>(counts.data()), 24);
  REQUIRE(in.gcount() == 24);
  CHECK(counts == acc.counts);  // this platform is little-endian
  in.get();
  CHECK(in.eof());
  std::filesystem::remove(path);
}
