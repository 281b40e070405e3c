#ifndef ZEROONE_PARALLEL_HPP
#define ZEROONE_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace zeroone {

namespace detail {

inline std::atomic<std::size_t>& max_threads_slot() {
  static std::atomic<std::size_t> value{0};  // 0 = hardware default
  return value;
}

}  // namespace detail

/// Caps worker threads for all parallel helpers; 0 restores the hardware
/// default. Results never depend on this value, only wall time does.
inline void set_max_threads(std::size_t n) { detail::max_threads_slot().store(n); }

inline std::size_t max_threads() {
  std::size_t cap = detail::max_threads_slot().load();
  if (cap == 0) {
    unsigned hw = std::thread::hardware_concurrency();
    cap = hw == 0 ? 1 : hw;
  }
  return cap;
}

namespace detail {

// Runs fn(begin, end) on disjoint chunks covering [0, n). Exceptions are
// collected per chunk and the lowest-index one is rethrown after the join.
template <class Fn>
void run_chunked(std::size_t n, Fn&& fn) {
  if (n == 0) return;
  const std::size_t threads = std::min(max_threads(), n);
  if (threads <= 1) {
    fn(std::size_t{0}, n);
    return;
  }
  const std::size_t chunk = (n + threads - 1) / threads;
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, &errors, t, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Applies fn(i) to every index in [0, n); iterations must be independent.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  detail::run_chunked(n, [&fn](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

/// Sum of fn(i) over [0, n) as unsigned integers. Integer addition is order
/// free, so the total is identical for every thread count.
template <class Fn>
std::uint64_t parallel_count(std::size_t n, Fn&& fn) {
  std::atomic<std::uint64_t> total{0};
  detail::run_chunked(n, [&fn, &total](std::size_t begin, std::size_t end) {
    std::uint64_t local = 0;
    for (std::size_t i = begin; i < end; ++i) local += static_cast<std::uint64_t>(fn(i));
    total.fetch_add(local, std::memory_order_relaxed);
  });
  return total.load();
}

}  // namespace zeroone

#endif  // ZEROONE_PARALLEL_HPP
