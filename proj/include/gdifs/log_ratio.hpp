#pragma once

// Heuristic scan for cycle pairs with log r_e / log r_f far from small
// rationals. Floating point cannot certify irrationality, so the report is an
// indication only.

#include <cmath>
#include <optional>
#include <vector>

#include "gdifs/approximator.hpp"

namespace gdifs {

struct Rational {
  long p = 0;
  long q = 1;
};

/// First continued-fraction convergent p/q of x with q <= max_den and
/// |x - p/q| <= tol * max(1, |x|), if any.
inline std::optional<Rational> small_rational(double x, long max_den = 10'000, double tol = 1e-12) {
  if (!std::isfinite(x)) throw InputError("small_rational: non-finite input");
  const double bound = tol * std::max(1.0, std::abs(x));
  long p0 = 1, q0 = 0, p1 = static_cast<long>(std::floor(x)), q1 = 1;
  double rest = x - std::floor(x);
  while (true) {
    if (std::abs(x - static_cast<double>(p1) / static_cast<double>(q1)) <= bound) return Rational{p1, q1};
    if (rest <= 0.0) return std::nullopt;
    const double inv = 1.0 / rest;
    const double a = std::floor(inv);
    rest = inv - a;
    if (a > static_cast<double>(max_den)) return std::nullopt;
    const long ai = static_cast<long>(a);
    const long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
    if (q2 > max_den) return std::nullopt;
    p0 = p1, q0 = q1, p1 = p2, q1 = q2;
  }
}

struct LogRatioPair {
  std::vector<EdgeId> first;   // cycle in system A
  std::vector<EdgeId> second;  // cycle in system B
  double quotient = 0.0;       // log r_first / log r_second
  std::optional<Rational> rational;
  bool flagged() const { return !rational; }
};

struct LogRatioReport {
  std::vector<LogRatioPair> pairs;
  size_t flagged = 0;
  bool certifying = false;  // always false
};

inline LogRatioReport log_ratio_check(const GdIfs& a, VertexId ja, const GdIfs& b, VertexId jb, int max_length = 4,
                                      size_t max_cycles = 64) {
  require_strongly_connected(a);
  require_strongly_connected(b);
  auto cycles = [&](const GdIfs& g, VertexId j) {
    if (j < 0 || j >= g.vertex_count()) throw InputError("vertex out of range");
    std::vector<EdgePath> out;
    detail::for_each_cycle(g, j, max_length, 100'000, [&](const EdgePath& c) {
      out.push_back(c);
      return out.size() < max_cycles;
    });
    return out;
  };
  const auto ca = cycles(a, ja), cb = cycles(b, jb);
  LogRatioReport rep;
  for (const auto& x : ca)
    for (const auto& y : cb) {
      LogRatioPair p{x.edges(), y.edges(), std::log(x.ratio()) / std::log(y.ratio()), std::nullopt};
      p.rational = small_rational(p.quotient);
      rep.flagged += p.flagged() ? 1 : 0;
      rep.pairs.push_back(std::move(p));
    }
  return rep;
}

}  // namespace gdifs
