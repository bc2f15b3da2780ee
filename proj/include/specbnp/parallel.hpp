#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace specbnp {

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Work is assigned by index,
/// so callers that write results into slot i get output independent of the thread count.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t used = std::min(workers, count);
  pool.reserve(used);
  for (std::size_t w = 0; w < used; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += used) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace specbnp
