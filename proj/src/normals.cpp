#include "primht/normals.hpp"

#include "primht/knn.hpp"
#include "primht/parallel.hpp"

#include <array>
#include <cmath>
#include <map>
#include <mutex>

namespace primht {

namespace {

// Vertices/faces of a unit icosahedron oriented with two vertices on the z axis.
void icosahedron(std::vector<Vec3>& verts, std::vector<std::array<int, 3>>& faces) {
  // Start from the standard (0, +-1, +-phi) cyclic coordinates, then rotate a
  // vertex onto +z so the poles are bins; this keeps axis-aligned clouds exact.
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> raw = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1},
  };
  for (auto& v : raw) v.normalize();
  const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(raw[5], Vec3::UnitZ());
  verts.clear();
  for (const auto& v : raw) {
    Vec3 r = q * v;
    for (int c = 0; c < 3; ++c) {
      if (std::abs(r(c)) < 1e-15) r(c) = 0.0;
    }
    verts.push_back(r.normalized());
  }
  faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
           {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
           {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
           {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
}

void subdivide(std::vector<Vec3>& verts, std::vector<std::array<int, 3>>& faces) {
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const int id = static_cast<int>(verts.size());
    verts.push_back((verts[static_cast<std::size_t>(a)] + verts[static_cast<std::size_t>(b)]).normalized());
    midpoint.emplace(key, id);
    return id;
  };
  std::vector<std::array<int, 3>> next;
  next.reserve(faces.size() * 4);
  for (const auto& f : faces) {
    const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
    next.push_back({f[0], ab, ca});
    next.push_back({f[1], bc, ab});
    next.push_back({f[2], ca, bc});
    next.push_back({ab, bc, ca});
  }
  faces = std::move(next);
}

DirectionBins make_level3() {
  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> faces;
  icosahedron(verts, faces);
  for (int level = 0; level < 3; ++level) subdivide(verts, faces);

  DirectionBins bins;
  bins.centers.resize(3, static_cast<Index>(verts.size()));
  for (std::size_t i = 0; i < verts.size(); ++i) bins.centers.col(static_cast<Index>(i)) = verts[i];

  // Antipodal pairing: the subdivided icosahedron is centrally symmetric, so
  // every vertex has an exact antipode among the vertices.
  bins.canonical.assign(verts.size(), -1);
  std::vector<Index> reps;
  auto prefer = [](const Vec3& v) {
    // Hemisphere convention: keep z > 0, break z == 0 by y then x.
    if (v.z() != 0.0) return v.z() > 0.0;
    if (v.y() != 0.0) return v.y() > 0.0;
    return v.x() > 0.0;
  };
  for (std::size_t i = 0; i < verts.size(); ++i) {
    if (bins.canonical[i] >= 0) continue;
    // Find the antipode.
    std::size_t j = i;
    double best = 2.0;
    for (std::size_t k = 0; k < verts.size(); ++k) {
      const double d = (verts[k] + verts[i]).norm();
      if (d < best) {
        best = d;
        j = k;
      }
    }
    const int id = static_cast<int>(reps.size());
    bins.canonical[i] = id;
    bins.canonical[j] = id;
    reps.push_back(static_cast<Index>(prefer(verts[i]) ? i : j));
  }
  bins.representatives.resize(3, static_cast<Index>(reps.size()));
  for (std::size_t i = 0; i < reps.size(); ++i)
    bins.representatives.col(static_cast<Index>(i)) = bins.centers.col(reps[i]);
  return bins;
}

}  // namespace

const DirectionBins& DirectionBins::level3() {
  static const DirectionBins bins = make_level3();
  return bins;
}

PointCloud estimate_normals(const PointCloud& cloud, int k, int workers) {
  if (k < 3) throw InvalidInput("estimate_normals: k must be >= 3");
  if (cloud.size() < k) throw InvalidInput("estimate_normals: cloud smaller than k");

  PointCloud out = cloud;
  out.normals.resize(3, cloud.size());
  out.normal_reliable.assign(static_cast<std::size_t>(cloud.size()), 0);

  const KnnIndex index(cloud.points);
  parallel_chunks(cloud.size(), workers, [&](Index begin, Index end, int) {
    for (Index i = begin; i < end; ++i) {
      const auto nb = index.knn(cloud.points.col(i), k);
      Vec3 mean = Vec3::Zero();
      for (const auto& n : nb) mean += cloud.points.col(n.index);
      mean /= static_cast<double>(nb.size());
      Mat3 cov = Mat3::Zero();
      for (const auto& n : nb) {
        const Vec3 d = cloud.points.col(n.index) - mean;
        cov += d * d.transpose();
      }
      cov /= static_cast<double>(nb.size());

      Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
      const Vec3 evals = eig.eigenvalues();  // ascending
      Vec3 normal = eig.eigenvectors().col(0);
      // Deterministic sign: first nonzero component positive.
      for (int c = 0; c < 3; ++c) {
        if (std::abs(normal(c)) > 1e-12) {
          if (normal(c) < 0) normal = -normal;
          break;
        }
      }
      out.normals.col(i) = normal;
      const bool degenerate = !(evals(1) > 0.0) || !normal.allFinite();
      const bool ambiguous = evals(1) > 0.0 && evals(0) / evals(1) > 0.9;
      out.normal_reliable[static_cast<std::size_t>(i)] = (degenerate || ambiguous) ? 0 : 1;
    }
  });
  return out;
}

Vec3 dominant_normal_direction(const PointCloud& cloud) {
  if (!cloud.has_normals()) throw InvalidInput("dominant_normal_direction: cloud has no normals");
  const DirectionBins& bins = DirectionBins::level3();
  std::vector<long> votes(static_cast<std::size_t>(bins.representatives.cols()), 0);

  // Score every normal against every bin centre; nearest centre (max dot)
  // wins, ties by lower column index via strict improvement.
  long total = 0;
  for (Index i = 0; i < cloud.size(); ++i) {
    if (!cloud.normal_reliable.empty() && !cloud.normal_reliable[static_cast<std::size_t>(i)]) continue;
    const Vec3 n = cloud.normals.col(i);
    Index best = 0;
    double best_dot = -2.0;
    for (Index b = 0; b < bins.centers.cols(); ++b) {
      const double d = bins.centers.col(b).dot(n);
      if (d > best_dot) {
        best_dot = d;
        best = b;
      }
    }
    ++votes[static_cast<std::size_t>(bins.canonical[static_cast<std::size_t>(best)])];
    ++total;
  }
  if (total == 0) throw NoDominantDirection("dominant_normal_direction: no reliable normals");

  std::size_t winner = 0;
  for (std::size_t b = 1; b < votes.size(); ++b) {
    if (votes[b] > votes[winner]) winner = b;
  }

  // Refine past the bin resolution: average the reliable normals that lie
  // within 10 degrees of the winning representative (sign-folded).  Exact for
  // planar clusters, a no-op in spirit for everything else.
  const Vec3 rep = bins.representatives.col(static_cast<Index>(winner));
  const double kRefineCos = std::cos(10.0 * M_PI / 180.0);
  Vec3 mean = Vec3::Zero();
  for (Index i = 0; i < cloud.size(); ++i) {
    if (!cloud.normal_reliable.empty() && !cloud.normal_reliable[static_cast<std::size_t>(i)]) continue;
    const Vec3 n = cloud.normals.col(i);
    const double d = n.dot(rep);
    if (std::abs(d) < kRefineCos) continue;
    mean += (d < 0.0) ? Vec3(-n) : n;
  }
  if (mean.norm() < 1e-12) return rep;
  return mean.normalized();
}

}  // namespace primht
