#pragma once

// Word counts N(k_1, ..., k_m): the number of length-k words in which letter
// l occurs exactly k_l times.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "gdifs/errors.hpp"

namespace gdifs {

struct WordCount {
  int k = 0;
  std::vector<int> counts;
  double log_count = 0.0;
  std::optional<std::uint64_t> exact;  // filled for k <= 20
};

/// Exact multinomial via a product of binomials; valid while it fits 64 bits.
inline std::uint64_t exact_multinomial(std::span<const int> counts) {
  unsigned __int128 result = 1;
  int seen = 0;
  for (int c : counts) {
    // multiply by binomial(seen + c, c), built incrementally so every
    // intermediate value is an integer
    for (int t = 1; t <= c; ++t) {
      result = result * static_cast<unsigned>(seen + t) / static_cast<unsigned>(t);
    }
    seen += c;
  }
  return static_cast<std::uint64_t>(result);
}

inline double log_multinomial(int k, std::span<const int> counts) {
  double v = std::lgamma(static_cast<double>(k) + 1.0);
  for (int c : counts) v -= std::lgamma(static_cast<double>(c) + 1.0);
  return v;
}

inline WordCount count_words(int k, std::span<const int> counts) {
  long sum = 0;
  for (int c : counts) {
    if (c < 0) throw InputError("count_words: negative letter count");
    sum += c;
  }
  if (sum != k) throw InputError("count_words: letter counts do not sum to k");
  WordCount w{k, std::vector<int>(counts.begin(), counts.end()), log_multinomial(k, counts), std::nullopt};
  if (k <= 20) w.exact = exact_multinomial(counts);
  return w;
}

/// log of c * k^{-m/2} * prod p_l^{-k_l} with c = 2^{-2m-1}.
inline double chebyshev_log_bound(std::span<const double> p, std::span<const int> counts, int k) {
  const double m = static_cast<double>(p.size());
  double v = -(2.0 * m + 1.0) * std::log(2.0) - 0.5 * m * std::log(static_cast<double>(k));
  for (size_t l = 0; l < p.size(); ++l) v -= counts[l] * std::log(p[l]);
  return v;
}

/// Letter counts inside the window |k_l - k p_l| < sqrt(2k) maximizing the
/// margin log N - log(c k^{-m/2} prod p_l^{-k_l}).
inline WordCount chebyshev_counts(std::span<const double> p, int k) {
  if (p.empty()) throw InputError("chebyshev_counts: empty probability vector");
  if (k < 1) throw InputError("chebyshev_counts: k must be >= 1");
  double total = 0.0;
  for (double x : p) {
    if (!(x > 0.0)) throw InputError("chebyshev_counts: probabilities must be positive");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InputError("chebyshev_counts: probabilities must sum to 1");

  const size_t m = p.size();
  const double w = std::sqrt(2.0 * k);
  std::vector<int> lo(m), hi(m);
  for (size_t l = 0; l < m; ++l) {
    const double c = k * p[l];
    lo[l] = std::max(0, static_cast<int>(std::floor(c - w)) + 1);
    hi[l] = std::min(k, static_cast<int>(std::ceil(c + w)) - 1);
  }
  auto inside = [&](size_t l, int v) { return std::abs(v - k * p[l]) < w; };

  std::vector<int> cur(m, 0), best;
  double best_margin = -std::numeric_limits<double>::infinity();
  // Enumerate the first m-1 coordinates; the last is determined by the sum.
  auto recurse = [&](auto&& self, size_t l, int remaining) -> void {
    if (l + 1 == m) {
      if (remaining < 0 || !inside(l, remaining)) return;
      cur[l] = remaining;
      const double margin = log_multinomial(k, cur) - chebyshev_log_bound(p, cur, k);
      if (margin > best_margin) {
        best_margin = margin;
        best = cur;
      }
      return;
    }
    for (int v = lo[l]; v <= hi[l] && v <= remaining; ++v) {
      if (!inside(l, v)) continue;
      cur[l] = v;
      self(self, l + 1, remaining - v);
    }
  };
  recurse(recurse, 0, k);
  if (best.empty()) throw InternalError("chebyshev_counts: empty window");
  return count_words(k, best);
}

}  // namespace gdifs
