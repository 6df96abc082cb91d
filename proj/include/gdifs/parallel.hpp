#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace gdifs {

/// Worker count: hardware concurrency, capped by the GDIFS_THREADS variable.
inline unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GDIFS_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
    } catch (...) {
    }
  }
  return n;
}

/// Runs body(i) for i in [0, n) over contiguous blocks. The body must only
/// write to per-index state so results do not depend on scheduling.
template <class F>
void parallel_for(size_t n, F&& body) {
  const unsigned workers = static_cast<unsigned>(std::min<size_t>(worker_count(), n));
  if (workers <= 1 || n < 256) {
    for (size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  const size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const size_t begin = w * chunk, end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] {
      for (size_t i = begin; i < end; ++i) body(i);
    });
  }
}

}  // namespace gdifs
