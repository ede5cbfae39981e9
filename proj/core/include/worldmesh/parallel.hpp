#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace worldmesh {

// Splits [begin, end) into contiguous chunks, one per hardware thread, and runs
// fn(chunk_begin, chunk_end) on each. Chunks never overlap, so callers may
// write to disjoint output ranges without locking.
template <class Fn>
void parallel_ranges(int begin, int end, Fn&& fn) {
  const int n = end - begin;
  if (n <= 0) return;
  const int threads = std::clamp(static_cast<int>(std::thread::hardware_concurrency()), 1, n);
  if (threads == 1) {
    fn(begin, end);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    int a = begin + n * t / threads, b = begin + n * (t + 1) / threads;
    pool.emplace_back([&fn, a, b] { fn(a, b); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace worldmesh
