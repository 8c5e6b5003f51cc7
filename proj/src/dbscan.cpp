#include "primht/dbscan.hpp"

#include "primht/knn.hpp"

#include <deque>

namespace primht {

std::vector<int> dbscan(const Points3& points, double radius, int min_pts) {
  const Index n = points.cols();
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  if (n == 0) return label;
  if (radius <= 0.0) throw InvalidInput("dbscan: radius must be positive");

  const KnnIndex index(points);
  std::vector<std::uint8_t> visited(static_cast<std::size_t>(n), 0);
  int next_cluster = 0;

  for (Index i = 0; i < n; ++i) {
    if (visited[static_cast<std::size_t>(i)]) continue;
    visited[static_cast<std::size_t>(i)] = 1;
    auto neighbors = index.radius(points.col(i), radius);
    if (static_cast<int>(neighbors.size()) < min_pts) continue;  // noise (may be claimed later)

    const int cluster = next_cluster++;
    label[static_cast<std::size_t>(i)] = cluster;
    std::deque<Index> queue(neighbors.begin(), neighbors.end());
    while (!queue.empty()) {
      const Index j = queue.front();
      queue.pop_front();
      if (label[static_cast<std::size_t>(j)] < 0) label[static_cast<std::size_t>(j)] = cluster;
      if (visited[static_cast<std::size_t>(j)]) continue;
      visited[static_cast<std::size_t>(j)] = 1;
      auto nb = index.radius(points.col(j), radius);
      if (static_cast<int>(nb.size()) >= min_pts) {
        for (Index q : nb) {
          if (!visited[static_cast<std::size_t>(q)] || label[static_cast<std::size_t>(q)] < 0) queue.push_back(q);
        }
      }
    }
  }
  return label;
}

std::vector<std::vector<Index>> dbscan_clusters(const Points3& points, double radius, int min_pts) {
  const auto labels = dbscan(points, radius, min_pts);
  int k = 0;
  for (int l : labels) k = std::max(k, l + 1);
  std::vector<std::vector<Index>> clusters(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) clusters[static_cast<std::size_t>(labels[i])].push_back(static_cast<Index>(i));
  }
  return clusters;
}

}  // namespace primht
