#pragma once

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace flowinv {

/// Worker count: min(hardware, AI_THREADS). Never affects results, only speed.
inline int thread_count() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("AI_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1 && v < static_cast<long>(hw)) hw = static_cast<unsigned>(v);
    if (v >= static_cast<long>(hw)) hw = static_cast<unsigned>(v);
  }
  return static_cast<int>(hw);
}

/// Runs fn(i) for i in [0,n). Work is claimed dynamically but anything fn
/// writes must go to slot i, so results cannot depend on the schedule.
template <typename Fn>
void parallel_for(long n, Fn&& fn) {
  int nt = thread_count();
  if (nt <= 1 || n <= 1) {
    for (long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        long i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

/// Deterministic sum of per-block partial results: blocks have fixed size,
/// partials land in fixed slots, and the final reduction is sequential in
/// block order. Bit-identical for any thread count.
template <typename Fn>
double parallel_block_sum(long n_items, long block_size, Fn&& block_fn) {
  long n_blocks = (n_items + block_size - 1) / block_size;
  std::vector<double> partial(static_cast<size_t>(n_blocks), 0.0);
  parallel_for(n_blocks, [&](long b) {
    long lo = b * block_size;
    long hi = std::min(n_items, lo + block_size);
    partial[static_cast<size_t>(b)] = block_fn(lo, hi);
  });
  double s = 0;
  for (double p : partial) s += p;
  return s;
}

}  // namespace flowinv
