#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace pairforge {

// Runs fn(0..count-1) on up to `workers` threads; results land at their input
// index so output order never depends on scheduling. Per-item recoverable
// failures belong inside fn (encode them in Out); an exception escaping fn
// aborts the whole map and is rethrown.
template <typename Out>
std::vector<Out> parallel_map(std::size_t count, int workers,
                              const std::function<Out(std::size_t)>& fn) {
  std::vector<Out> results(count);
  if (count == 0) return results;
  int n_workers = workers < 1 ? 1 : workers;
  if (static_cast<std::size_t>(n_workers) > count) {
    n_workers = static_cast<int>(count);
  }
  if (n_workers == 1) {
    for (std::size_t i = 0; i < count; ++i) results[i] = fn(i);
    return results;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) {
    threads.emplace_back([&] {
      while (!failed.load()) {
        std::size_t i = next.fetch_add(1);
        if (i >= count) break;
        try {
          results[i] = fn(i);
        } catch (...) {
          {
            std::lock_guard<std::mutex> lock(error_mu);
            if (!error) error = std::current_exception();
          }
          failed.store(true);
          break;
        }
      }
    });
  }
  for (std::thread& t : threads) t.join();
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace pairforge
