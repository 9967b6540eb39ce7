#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace pulse_optics {

/// Thread count from PULSE_OPTICS_THREADS, default 1.
inline int thread_count() {
  const char* v = std::getenv("PULSE_OPTICS_THREADS");
  if (!v) return 1;
  const int n = std::atoi(v);
  return std::max(1, std::min(n, 256));
}

/// Runs body(i) for i in [0, n) on contiguous blocks; each index is handled by exactly one thread.
inline void parallel_for(int n, const std::function<void(int)>& body, int threads = thread_count()) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    const int lo = n * t / threads, hi = n * (t + 1) / threads;
    pool.emplace_back([lo, hi, t, &body, &errors] {
      try {
        for (int i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[static_cast<size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace pulse_optics
