#include "primht/knn.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace primht {

namespace {

constexpr Index kLeafSize = 16;

}  // namespace

KnnIndex::KnnIndex(const Points3& points) : points_(points) {
  order_.resize(static_cast<std::size_t>(points_.cols()));
  std::iota(order_.begin(), order_.end(), Index{0});
  if (!order_.empty()) root_ = build(0, points_.cols(), 0);
}

int KnnIndex::build(Index begin, Index end, int depth) {
  Node node;
  node.begin = begin;
  node.end = end;
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= kLeafSize) return id;

  // Split on the axis with the largest extent of this node's points.
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (Index i = begin; i < end; ++i) {
    const Vec3 p = points_.col(order_[static_cast<std::size_t>(i)]);
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi(axis) == lo(axis)) return id;  // all points coincide on every axis

  const Index mid = begin + (end - begin) / 2;
  auto first = order_.begin() + begin;
  auto nth = order_.begin() + mid;
  auto last = order_.begin() + end;
  std::nth_element(first, nth, last, [&](Index a, Index b) {
    const double pa = points_(axis, a), pb = points_(axis, b);
    return pa < pb || (pa == pb && a < b);
  });

  nodes_[static_cast<std::size_t>(id)].axis = axis;
  nodes_[static_cast<std::size_t>(id)].split = points_(axis, order_[static_cast<std::size_t>(mid)]);
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

std::vector<KnnIndex::Neighbor> KnnIndex::knn(const Vec3& query, int k) const {
  const Index n = points_.cols();
  if (n == 0 || k <= 0) return {};
  k = static_cast<int>(std::min<Index>(k, n));

  // Max-heap of the current best k, worst on top. Ordering treats equal
  // distances with larger index as worse, matching a (distance, index) sort.
  struct Entry {
    double d2;
    Index idx;
  };
  auto worse = [](const Entry& a, const Entry& b) {
    return a.d2 < b.d2 || (a.d2 == b.d2 && a.idx < b.idx);
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);

  auto consider = [&](Index idx) {
    const double d2 = (points_.col(idx) - query).squaredNorm();
    if (static_cast<int>(heap.size()) < k) {
      heap.push({d2, idx});
    } else if (d2 < heap.top().d2 || (d2 == heap.top().d2 && idx < heap.top().idx)) {
      heap.pop();
      heap.push({d2, idx});
    }
  };

  // Iterative traversal, near child first.
  std::vector<int> pending;
  pending.push_back(root_);
  while (!pending.empty()) {
    const int id = pending.back();
    pending.pop_back();
    if (id < 0) continue;
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.axis < 0) {
      for (Index i = node.begin; i < node.end; ++i) consider(order_[static_cast<std::size_t>(i)]);
      continue;
    }
    const double delta = query(node.axis) - node.split;
    const int near = delta <= 0 ? node.left : node.right;
    const int far = delta <= 0 ? node.right : node.left;
    // Visit the far side unless it provably cannot improve the heap.
    if (static_cast<int>(heap.size()) < k || delta * delta <= heap.top().d2) pending.push_back(far);
    pending.push_back(near);
  }

  std::vector<Neighbor> out(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = {heap.top().idx, std::sqrt(heap.top().d2)};
    heap.pop();
  }
  return out;
}

std::vector<Index> KnnIndex::radius(const Vec3& query, double radius) const {
  std::vector<Index> out;
  if (points_.cols() == 0 || radius < 0) return out;
  const double r2 = radius * radius;
  std::vector<int> pending;
  pending.push_back(root_);
  while (!pending.empty()) {
    const int id = pending.back();
    pending.pop_back();
    if (id < 0) continue;
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.axis < 0) {
      for (Index i = node.begin; i < node.end; ++i) {
        const Index idx = order_[static_cast<std::size_t>(i)];
        if ((points_.col(idx) - query).squaredNorm() <= r2) out.push_back(idx);
      }
      continue;
    }
    const double delta = query(node.axis) - node.split;
    const int near = delta <= 0 ? node.left : node.right;
    const int far = delta <= 0 ? node.right : node.left;
    if (delta * delta <= r2) pending.push_back(far);
    pending.push_back(near);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<KnnIndex::Neighbor> knn_query(const PointCloud& cloud, const Vec3& query, int k) {
  return KnnIndex(cloud.points).knn(query, k);
}

double mean_knn_spacing(const Points3& points, int k, Index max_sample) {
  const Index n = points.cols();
  if (n < 2) return 0.0;
  KnnIndex index(points);
  const Index stride = std::max<Index>(1, n / std::max<Index>(1, max_sample));
  double sum = 0.0;
  Index count = 0;
  for (Index i = 0; i < n; i += stride) {
    // k+1 because the query point itself is its own nearest neighbour.
    const auto nb = index.knn(points.col(i), k + 1);
    sum += nb.back().distance;
    ++count;
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace primht
