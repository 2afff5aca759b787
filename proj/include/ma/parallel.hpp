#pragma once

#include <cstdlib>
#include <algorithm>
#include <thread>
#include <vector>

namespace ma {

// Thread cap: MA_THREADS env var, else hardware concurrency.
inline int max_threads() {
  static const int cached = [] {
    if (const char* env = std::getenv("MA_THREADS")) {
      const int v = std::atoi(env);
      if (v >= 1) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
  }();
  return cached;
}

// Runs f(begin, end) over disjoint chunks of [0, n). Intended for pure
// elementwise maps (each index written once, no shared accumulation), which
// stay bit-reproducible under any MA_THREADS setting. Reductions go through
// pairwise_sum on the assembled array instead.
template <class F>
void parallel_for(long n, F&& f) {
  if (n <= 0) return;
  const int threads = std::min<long>(max_threads(), n);
  if (threads <= 1 || n < 4096) {
    f(0L, n);
    return;
  }
  const long chunk = (n + threads - 1) / threads;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    const long lo = t * chunk;
    const long hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&f, lo, hi] { f(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace ma
