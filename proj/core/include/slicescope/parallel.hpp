#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace slicescope {

// Worker count: hardware concurrency, capped by SLICESCOPE_THREADS when set.
inline unsigned thread_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SLICESCOPE_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

// Runs body(begin, end) over [0, total) split into chunks of at most
// `chunk` items. Each index is processed exactly once and chunk boundaries
// carry no state, so results must not depend on the schedule.
inline void parallel_chunks(std::size_t total, std::size_t chunk,
                            const std::function<void(std::size_t, std::size_t)>& body) {
  if (total == 0) return;
  chunk = std::max<std::size_t>(1, chunk);
  const unsigned workers = std::min<unsigned>(
      thread_count(), static_cast<unsigned>((total + chunk - 1) / chunk));
  if (workers <= 1) {
    for (std::size_t lo = 0; lo < total; lo += chunk) body(lo, std::min(lo + chunk, total));
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::atomic<std::size_t> cursor{0};
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t lo = cursor.fetch_add(chunk);
        if (lo >= total) return;
        body(lo, std::min(lo + chunk, total));
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace slicescope
