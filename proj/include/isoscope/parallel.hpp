#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace isoscope {

inline constexpr const char* kWorkersEnv = "ISOSCOPE_WORKERS";

/// Worker count from ISOSCOPE_WORKERS, else hardware concurrency.
inline std::size_t default_worker_count() {
  if (const char* env = std::getenv(kWorkersEnv)) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Evaluates fn(i) for i in [0, count) on at most `workers` threads. Results are
/// stored by index, so the output is independent of completion order. The
/// first exception (lowest index) is rethrown after all workers finish.
template <typename Result, typename Fn>
std::vector<Result> parallel_map(std::size_t count, std::size_t workers, Fn&& fn) {
  std::vector<Result> results(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        results[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace isoscope
