#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace hebr {

/// Worker count: HEBR_THREADS env var wins over the requested value; a
/// request of 0 means "hardware concurrency".
inline int resolve_threads(int requested) {
  if (const char* env = std::getenv("HEBR_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Runs fn(i) for i in [0, n). Work items must be independent; callers that
/// need determinism write into per-index slots and reduce in index order
/// afterwards, so the schedule never affects results.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  if (n <= 0) return;
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace hebr
