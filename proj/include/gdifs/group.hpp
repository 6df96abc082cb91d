#pragma once

// Finite approximations of groups generated by orthogonal transforms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <unordered_map>
#include <vector>

#include "gdifs/geometry.hpp"

namespace gdifs {

/// Spatial index over orthogonal matrices keyed by the quantized first column.
class TransformIndex {
 public:
  explicit TransformIndex(double cell) : cell_(cell) {}

  size_t size() const { return items_.size(); }
  const std::vector<OrthogonalTransform>& items() const { return items_; }

  void insert(const OrthogonalTransform& t) {
    const size_t idx = items_.size();
    items_.push_back(t);
    buckets_[key_of(quantize(t))].push_back(idx);
  }

  /// Index of some stored element within `tol` (tol <= cell), or -1.
  long find_within(const OrthogonalTransform& t, double tol) const {
    long best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    visit_neighbors(t, [&](size_t idx) {
      const double d = distance(items_[idx], t, tol);
      if (d <= tol && d < best_d) {
        best_d = d;
        best = static_cast<long>(idx);
      }
    });
    return best;
  }

  /// Exact nearest element by linear scan (not limited to neighbor cells).
  std::pair<long, double> nearest(const OrthogonalTransform& t) const {
    long best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < items_.size(); ++i) {
      const double d = operator_distance(items_[i], t);
      if (d < best_d) {
        best_d = d;
        best = static_cast<long>(i);
      }
    }
    return {best, best_d};
  }

 private:
  std::vector<long> quantize(const OrthogonalTransform& t) const {
    const Mat& m = t.matrix();
    std::vector<long> q(static_cast<size_t>(m.rows()) + 1);
    for (Eigen::Index r = 0; r < m.rows(); ++r) q[static_cast<size_t>(r)] = static_cast<long>(std::floor(m(r, 0) / cell_));
    q.back() = t.preserves_orientation() ? 1 : -1;
    return q;
  }

  static std::uint64_t key_of(const std::vector<long>& q) {
    std::uint64_t h = 14695981039346656037ULL;
    for (long v : q) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL;
      h *= 1099511628211ULL;
    }
    return h;
  }

  template <class F>
  void visit_neighbors(const OrthogonalTransform& t, F&& f) const {
    const auto base = quantize(t);
    const size_t d = base.size() - 1;
    std::vector<long> cur = base;
    size_t combos = 1;
    for (size_t i = 0; i < d; ++i) combos *= 3;
    for (size_t c = 0; c < combos; ++c) {
      size_t rem = c;
      for (size_t i = 0; i < d; ++i) {
        cur[i] = base[i] + static_cast<long>(rem % 3) - 1;
        rem /= 3;
      }
      auto it = buckets_.find(key_of(cur));
      if (it == buckets_.end()) continue;
      for (size_t idx : it->second) f(idx);
    }
  }

  static double distance(const OrthogonalTransform& a, const OrthogonalTransform& b, double tol) {
    const Mat diff = a.matrix() - b.matrix();
    const double frob = diff.norm();
    if (frob <= tol) return frob;
    if (frob > std::sqrt(static_cast<double>(diff.rows())) * tol) return frob;
    return detail::op_norm(diff);
  }

  double cell_;
  std::vector<OrthogonalTransform> items_;
  std::unordered_map<std::uint64_t, std::vector<size_t>> buckets_;
};

struct EpsilonNet {
  std::vector<OrthogonalTransform> elements;
  double epsilon = 0.0;
  double resolution = 0.0;  // dedup radius used for the stored elements
  bool finite_group = false;
  bool truncated = false;
  // Planar only: covering radius of the net within each orientation class
  // that it meets. NaN otherwise.
  double planar_covering_radius = std::numeric_limits<double>::quiet_NaN();

  /// Distance from t to the nearest net element.
  double distance_to(const OrthogonalTransform& t) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : elements) best = std::min(best, operator_distance(e, t));
    return best;
  }

  /// Smallest pairwise distance between distinct elements (the group gap for
  /// finite groups).
  double min_separation() const {
    double best = std::numeric_limits<double>::infinity();
    for (size_t a = 0; a < elements.size(); ++a)
      for (size_t b = a + 1; b < elements.size(); ++b) best = std::min(best, operator_distance(elements[a], elements[b]));
    return best;
  }
};

namespace detail {

// Breadth-first closure under right multiplication by generators and their
// inverses, deduplicated at `tol`. Returns false if `budget` was exceeded.
inline bool bfs_closure(const std::vector<OrthogonalTransform>& gens, int d, double tol, size_t budget,
                        std::vector<OrthogonalTransform>& out) {
  std::vector<OrthogonalTransform> steps;
  for (const auto& g : gens) {
    steps.push_back(g);
    steps.push_back(g.inverse());
  }
  TransformIndex index(std::max(tol, 1e-12));
  index.insert(OrthogonalTransform::identity(d));
  size_t head = 0;
  while (head < index.size()) {
    const OrthogonalTransform cur = index.items()[head++];
    for (const auto& s : steps) {
      OrthogonalTransform p = cur * s;
      if (index.find_within(p, tol) >= 0) continue;
      if (index.size() >= budget) {
        out = index.items();
        return false;
      }
      index.insert(p);
    }
  }
  out = index.items();
  return true;
}

inline double planar_covering_radius(const std::vector<OrthogonalTransform>& elems) {
  double worst = 0.0;
  for (int orient : {1, -1}) {
    std::vector<double> angles;
    for (const auto& e : elems)
      if ((e.preserves_orientation() ? 1 : -1) == orient) angles.push_back(e.planar_angle());
    if (angles.empty()) continue;
    std::sort(angles.begin(), angles.end());
    double gap = angles.front() + 2.0 * std::numbers::pi - angles.back();
    for (size_t i = 1; i < angles.size(); ++i) gap = std::max(gap, angles[i] - angles[i - 1]);
    worst = std::max(worst, 2.0 * std::sin(gap / 4.0));
  }
  return worst;
}

}  // namespace detail

/// Closure of the group generated by `generators`. First an exact closure
/// (tolerance 1e-9) is attempted; if it closes within `budget` elements the
/// group is reported finite. Otherwise an epsilon-net of the closure is built
/// at resolution epsilon/4.
inline EpsilonNet group_closure(const std::vector<OrthogonalTransform>& generators, int d, double epsilon,
                                size_t budget = 4096) {
  if (!(epsilon > 0.0)) throw InputError("group_closure: epsilon must be positive");
  if (budget < 1) throw InputError("group_closure: budget must be >= 1");
  for (const auto& g : generators)
    if (g.dim() != d) throw InputError("group_closure: generator dimension mismatch");
  EpsilonNet net;
  net.epsilon = epsilon;
  if (detail::bfs_closure(generators, d, 1e-9, budget, net.elements)) {
    net.finite_group = true;
    net.resolution = 1e-9;
  } else {
    net.resolution = epsilon / 4.0;
    net.truncated = !detail::bfs_closure(generators, d, net.resolution, budget, net.elements);
  }
  if (d == 2) net.planar_covering_radius = detail::planar_covering_radius(net.elements);
  return net;
}

}  // namespace gdifs
