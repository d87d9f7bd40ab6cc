// Data-parallel helpers.
//
// Work is split into contiguous index ranges, one per worker. Every output
// element is written by exactly one worker and computed with the same
// arithmetic regardless of the split, so results never depend on the worker
// count. Reductions go through fixed_tree_sum, whose association order is a
// function of the input length only.
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace atv {

namespace detail {
inline std::atomic<int>& worker_setting() {
  static std::atomic<int> workers{0};
  return workers;
}
}  // namespace detail

inline int hardware_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

/// 0 selects the hardware concurrency.
inline void set_num_workers(int n) { detail::worker_setting().store(std::max(0, n)); }

inline int num_workers() {
  const int n = detail::worker_setting().load();
  return n > 0 ? n : hardware_workers();
}

/// Reads ATV_STEREO_THREADS; returns 0 when unset or unparsable.
inline int workers_from_env() {
  const char* env = std::getenv("ATV_STEREO_THREADS");
  if (env == nullptr) return 0;
  try {
    return std::max(0, std::stoi(env));
  } catch (...) {
    return 0;
  }
}

/// Calls fn(i) for every i in [begin, end). Exceptions from workers are
/// rethrown on the caller; the one from the lowest chunk wins.
template <typename Fn>
void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end, Fn&& fn) {
  const std::ptrdiff_t n = end - begin;
  if (n <= 0) return;
  const std::ptrdiff_t chunks = std::min<std::ptrdiff_t>(num_workers(), n);
  if (chunks <= 1) {
    for (std::ptrdiff_t i = begin; i < end; ++i) fn(i);
    return;
  }

  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(chunks));
  auto run_chunk = [&](std::ptrdiff_t c) {
    const std::ptrdiff_t lo = begin + n * c / chunks;
    const std::ptrdiff_t hi = begin + n * (c + 1) / chunks;
    try {
      for (std::ptrdiff_t i = lo; i < hi; ++i) fn(i);
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  };

  {
    std::vector<std::jthread> threads;
    threads.reserve(static_cast<std::size_t>(chunks - 1));
    for (std::ptrdiff_t c = 1; c < chunks; ++c) threads.emplace_back(run_chunk, c);
    run_chunk(0);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Pairwise sum over fixed 256-element leaves. Leaves may be summed in
/// parallel; the combination tree depends only on values.size().
inline double fixed_tree_sum(std::span<const double> values) {
  constexpr std::size_t kLeaf = 256;
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  const std::size_t leaves = (n + kLeaf - 1) / kLeaf;
  std::vector<double> partial(leaves, 0.0);
  parallel_for(0, static_cast<std::ptrdiff_t>(leaves), [&](std::ptrdiff_t l) {
    const std::size_t lo = static_cast<std::size_t>(l) * kLeaf;
    const std::size_t hi = std::min(n, lo + kLeaf);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += values[i];
    partial[static_cast<std::size_t>(l)] = s;
  });
  while (partial.size() > 1) {
    std::vector<double> next((partial.size() + 1) / 2);
    for (std::size_t i = 0; i < next.size(); ++i) {
      next[i] = partial[2 * i] + (2 * i + 1 < partial.size() ? partial[2 * i + 1] : 0.0);
    }
    partial.swap(next);
  }
  return partial.front();
}

}  // namespace atv
