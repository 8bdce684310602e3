#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace selboot {

inline constexpr const char* threads_env_var = "SELBOOT_THREADS";

// Worker count: SELBOOT_THREADS when set to a positive integer, otherwise the
// machine's hardware concurrency.
inline std::size_t default_thread_count() {
  if (const char* env = std::getenv(threads_env_var)) {
    try {
      const long value = std::stol(env);
      if (value > 0) return static_cast<std::size_t>(value);
    } catch (...) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Runs body(task, worker) for every task in [0, count). Tasks are handed out
// dynamically, so bodies must not depend on which worker runs them. The first
// exception thrown by any body is rethrown after all workers join.
template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, count));
  if (threads == 1) {
    for (std::size_t task = 0; task < count; ++task) body(task, std::size_t{0});
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t worker = 0; worker < threads; ++worker) {
    pool.emplace_back([&, worker] {
      for (;;) {
        const std::size_t task = next.fetch_add(1, std::memory_order_relaxed);
        if (task >= count) return;
        try {
          body(task, worker);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(count, std::memory_order_relaxed);
          return;
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace selboot
