#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vatika {

// Runs fn(i) for i in [0, n) on up to `workers` threads. Callers write results
// into index-addressed slots, so reductions stay deterministic regardless of
// scheduling. The first exception thrown by any worker is rethrown on the
// calling thread after all workers join.
template <typename Fn>
void parallel_for(size_t n, int workers, Fn&& fn) {
  if (n == 0) return;
  const size_t width = std::max<size_t>(1, std::min<size_t>(size_t(std::max(workers, 1)), n));
  if (width == 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto body = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(width);
  for (size_t t = 0; t < width; ++t) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace vatika
