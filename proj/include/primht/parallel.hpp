#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace primht {

/// Run fn(begin, end) over [0, n) split into `workers` contiguous chunks.
/// With workers <= 1 the call runs inline.  Chunk boundaries depend only on
/// (n, workers), so deterministic per-chunk outputs stay deterministic.
inline void parallel_chunks(Eigen::Index n, int workers,
                            const std::function<void(Eigen::Index, Eigen::Index, int)>& fn) {
  workers = std::max(1, workers);
  if (workers == 1 || n < 2 * workers) {
    fn(0, n, 0);
    return;
  }
  const Eigen::Index chunk = (n + workers - 1) / workers;
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    const Eigen::Index begin = std::min<Eigen::Index>(n, w * chunk);
    const Eigen::Index end = std::min<Eigen::Index>(n, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back(fn, begin, end, w);
  }
  for (auto& t : threads) t.join();
}

}  // namespace primht
