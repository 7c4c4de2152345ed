#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace qualsim {

// Runs fn(i) for i in [0, n). Work items must be independent; results keyed
// by index are identical for any worker count.
inline void parallel_for(std::size_t n, int workers,
                         const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int count = std::min<int>(workers, static_cast<int>(n));
  pool.reserve(static_cast<std::size_t>(count));
  for (int w = 0; w < count; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

}  // namespace qualsim
