#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <type_traits>
#include <vector>

namespace treecast {

// TREECAST_THREADS if set, else the hardware concurrency.
inline unsigned default_workers() {
  if (const char* env = std::getenv("TREECAST_THREADS"); env != nullptr && *env != '\0') {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

/// results[i] = f(i) for i in [0, count). Items are handed out dynamically,
/// but each result lands in its own slot, so the output never depends on the
/// worker count. The first exception thrown by any item is rethrown.
template <class F>
auto parallel_map(std::uint64_t count, F&& f, unsigned workers = default_workers())
    -> std::vector<std::invoke_result_t<F&, std::uint64_t>> {
  using R = std::invoke_result_t<F&, std::uint64_t>;
  std::vector<R> results(count);
  workers = static_cast<unsigned>(std::min<std::uint64_t>(std::max(1U, workers), std::max<std::uint64_t>(count, 1)));
  if (workers == 1) {
    for (std::uint64_t i = 0; i < count; ++i) results[i] = f(i);
    return results;
  }
  std::atomic<std::uint64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto work = [&] {
    for (;;) {
      const std::uint64_t i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        results[i] = f(i);
      } catch (...) {
        const std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace treecast
