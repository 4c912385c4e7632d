#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace nambu {

/// Worker count from NAMBU_LAB_THREADS, defaulting to the hardware count.
inline unsigned worker_count() {
  if (const char* env = std::getenv("NAMBU_LAB_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls f(i) for i in [0, n) across workers. Each index is visited exactly
/// once; results written per index are therefore deterministic. The first
/// exception (lowest index) is rethrown after all workers join.
template <class F>
void parallel_for(std::size_t n, F&& f) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::mutex mu;
  std::size_t failed_index = n;
  std::exception_ptr failure;
  std::vector<std::thread> threads;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    threads.emplace_back([&, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (i < failed_index) {
            failed_index = i;
            failure = std::current_exception();
          }
          return;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace nambu
