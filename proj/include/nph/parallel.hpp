#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace nph {

/// Worker count for voxel-parallel loops (clamped to hardware concurrency).
inline unsigned worker_count() {
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Splits [begin, end) into contiguous chunks and runs fn(chunk_begin,
/// chunk_end) on each, one thread per chunk. Callers own determinism:
/// reductions must accumulate into per-index (not per-thread) storage so
/// results do not depend on the worker count.
template <typename Fn>
void parallel_chunks(std::int64_t begin, std::int64_t end, Fn&& fn) {
  const std::int64_t n = end - begin;
  if (n <= 0) return;
  const unsigned workers = std::min<std::int64_t>(worker_count(), n) > 0
                               ? unsigned(std::min<std::int64_t>(worker_count(), n))
                               : 1u;
  if (workers == 1) {
    fn(begin, end);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::int64_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::int64_t lo = begin + std::int64_t(w) * chunk;
    const std::int64_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace nph
