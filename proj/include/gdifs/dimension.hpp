#pragma once

// Similarity dimension, Mauldin-Williams dimension and a box-counting estimator.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "gdifs/errors.hpp"
#include "gdifs/graph.hpp"

namespace gdifs {

enum class DimensionMethod { scalar_moran, spectral_radius, box_counting };

inline const char* to_string(DimensionMethod m) {
  switch (m) {
    case DimensionMethod::scalar_moran: return "scalar_moran";
    case DimensionMethod::spectral_radius: return "spectral_radius";
    case DimensionMethod::box_counting: return "box_counting";
  }
  return "unknown";
}

struct DimensionResult {
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  DimensionMethod method = DimensionMethod::scalar_moran;
};

namespace detail {

// Bisection for the root of a strictly decreasing f with f(0) >= 0.
template <class F>
DimensionResult bisect_decreasing(F&& f, double hi, double width, DimensionMethod method) {
  double lo = 0.0;
  if (f(0.0) <= 0.0) return {0.0, 0.0, 0.0, method};
  while (f(hi) > 0.0) hi *= 2.0;
  while (hi - lo > width) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return {0.5 * (lo + hi), lo, hi, method};
}

}  // namespace detail

/// Unique s with sum r_i^s = 1.
inline DimensionResult similarity_dimension(std::span<const double> ratios) {
  if (ratios.empty()) throw InputError("similarity_dimension: empty ratio list");
  for (double r : ratios)
    if (!(r > 0.0 && r < 1.0)) throw InputError("similarity_dimension: ratios must lie in (0,1)");
  auto f = [&](double s) {
    double sum = 0.0;
    for (double r : ratios) sum += std::pow(r, s);
    return sum - 1.0;
  };
  return detail::bisect_decreasing(f, 8.0, 1e-12, DimensionMethod::scalar_moran);
}

/// A(s)_{il} = sum over edges i -> l of r_e^s.
inline Mat ratio_matrix(const GdIfs& g, double s) {
  Mat a = Mat::Zero(g.vertex_count(), g.vertex_count());
  for (const auto& e : g.edges()) a(e.source, e.target) += std::pow(e.map.ratio(), s);
  return a;
}

struct PerronRoot {
  double value = 0.0;
  double lo = 0.0;  // Collatz-Wielandt lower bound
  double hi = 0.0;  // Collatz-Wielandt upper bound
  int iterations = 0;
};

/// Perron root of a nonnegative irreducible matrix by power iteration on
/// I + A (primitive, so iteration converges even for periodic A). The
/// Collatz-Wielandt quotients bracket the root at every step.
inline PerronRoot perron_root(const Mat& a, double tol = 1e-13, int max_iter = 100000) {
  const Eigen::Index n = a.rows();
  const Mat b = a + Mat::Identity(n, n);
  Vec x = Vec::Ones(n);
  PerronRoot out;
  for (int it = 1; it <= max_iter; ++it) {
    Vec y = b * x;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double q = y(i) / x(i);
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
    out = {0.5 * (lo + hi) - 1.0, lo - 1.0, hi - 1.0, it};
    if (hi - lo <= tol * std::max(1.0, hi)) break;
    x = y / y.maxCoeff();
    // Restart from a perturbed vector if an entry underflowed.
    if (x.minCoeff() <= 1e-300) x = x.array() + 1e-6 * (1.0 + static_cast<double>(it % 7));
  }
  return out;
}

/// Unique s >= 0 with spectral radius rho(A(s)) = 1.
inline DimensionResult mauldin_williams_dimension(const GdIfs& g) {
  require_strongly_connected(g);
  auto f = [&](double s) {
    const PerronRoot p = perron_root(ratio_matrix(g, s));
    return p.value - 1.0;
  };
  auto res = detail::bisect_decreasing(f, g.ambient_dim() + 5.0, 1e-12, DimensionMethod::spectral_radius);
  return res;
}

/// Dimension seen from vertex j via the first-return series: the root of
/// F_j(s) = A_jj + A_jR (I - A_RR)^{-1} A_Rj = 1, where R is the set of other
/// vertices. Agrees with the spectral value for strongly connected graphs.
inline DimensionResult vertex_dimension(const GdIfs& g, VertexId j) {
  require_strongly_connected(g);
  const int q = g.vertex_count();
  std::vector<int> rest;
  for (int v = 0; v < q; ++v)
    if (v != j) rest.push_back(v);
  auto f = [&](double s) {
    const Mat a = ratio_matrix(g, s);
    if (rest.empty()) return a(j, j) - 1.0;
    const auto n = static_cast<Eigen::Index>(rest.size());
    Mat arr(n, n);
    Vec arj(n), ajr(n);
    for (Eigen::Index x = 0; x < n; ++x) {
      arj(x) = a(rest[x], j);
      ajr(x) = a(j, rest[x]);
      for (Eigen::Index y = 0; y < n; ++y) arr(x, y) = a(rest[x], rest[y]);
    }
    const Mat m = Mat::Identity(n, n) - arr;
    Eigen::FullPivLU<Mat> lu(m);
    if (!lu.isInvertible()) return 1.0;
    const Mat inv = lu.inverse();
    // Neumann series diverges (rho(A_RR) >= 1) iff the inverse has a negative entry.
    if (inv.minCoeff() < -1e-12) return 1.0;
    return a(j, j) + ajr.dot(inv * arj) - 1.0;
  };
  auto res = detail::bisect_decreasing(f, g.ambient_dim() + 5.0, 1e-12, DimensionMethod::spectral_radius);
  return res;
}

/// Least-squares slope of log N(delta) against log(1/delta). The bracket is
/// value +/- one standard error of the slope.
inline DimensionResult box_counting_estimate(std::span<const Vec> points, std::span<const double> scales) {
  if (points.size() < 1000) throw InputError("box counting needs at least 1000 points");
  if (scales.size() < 4) throw InputError("box counting needs at least 4 scales");
  const auto [smin, smax] = std::minmax_element(scales.begin(), scales.end());
  if (!(*smin > 0.0) || *smax / *smin < 4.0) throw InputError("box counting scales must span at least two octaves");
  const Eigen::Index d = points.front().size();
  Vec lo = points.front(), hi = points.front();
  for (const auto& p : points) {
    if (p.size() != d) throw InputError("box counting: mixed point dimensions");
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  if ((hi - lo).maxCoeff() == 0.0) return {0.0, 0.0, 0.0, DimensionMethod::box_counting};

  std::vector<double> xs, ys;
  for (double delta : scales) {
    std::unordered_set<std::uint64_t> cells;
    for (const auto& p : points) {
      std::uint64_t h = 14695981039346656037ULL;
      for (Eigen::Index k = 0; k < d; ++k) {
        const auto c = static_cast<std::int64_t>(std::floor((p(k) - lo(k)) / delta));
        h ^= static_cast<std::uint64_t>(c) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h *= 1099511628211ULL;
      }
      cells.insert(h);
    }
    xs.push_back(std::log(1.0 / delta));
    ys.push_back(std::log(static_cast<double>(cells.size())));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
  mx /= n, my /= n;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  double rss = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (my + slope * (xs[i] - mx));
    rss += r * r;
  }
  const double se = std::sqrt(rss / (n - 2.0) / sxx);
  return {slope, slope - se, slope + se, DimensionMethod::box_counting};
}

}  // namespace gdifs
