#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace qma {

/// Worker cap: hardware concurrency, limited by the QMA_THREADS env var.
inline int worker_count() {
  static const int count = [] {
    int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("QMA_THREADS")) {
      try {
        const int cap = std::stoi(env);
        if (cap >= 1) hw = std::min(hw, cap);
      } catch (const std::exception&) {
      }
    }
    return hw;
  }();
  return count;
}

/// Runs fn(i) for i in [0, count). Every index writes only its own output, so
/// results do not depend on the thread count. The exception from the lowest
/// failing chunk is rethrown.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  constexpr std::size_t kMinChunk = 64;
  const std::size_t threads =
      std::min<std::size_t>(static_cast<std::size_t>(worker_count()), (count + kMinChunk - 1) / kMinChunk);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const std::size_t chunk = (count + threads - 1) / threads;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(count, begin + chunk);
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace qma
