#pragma once

// Graph-directed IFS: a directed multigraph whose edges carry similarities.

#include <algorithm>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gdifs/errors.hpp"
#include "gdifs/geometry.hpp"

namespace gdifs {

using VertexId = int;
using EdgeId = int;

struct Edge {
  VertexId source;
  VertexId target;
  Similarity map;
};

class GdIfs {
 public:
  GdIfs(int vertex_count, std::vector<Edge> edges) : vertex_count_(vertex_count), edges_(std::move(edges)) {
    if (vertex_count_ < 1) throw InputError("GD-IFS needs at least one vertex");
    if (edges_.empty()) throw InputError("GD-IFS needs at least one edge");
    dim_ = edges_.front().map.dim();
    out_.assign(vertex_count_, {});
    in_.assign(vertex_count_, {});
    for (EdgeId id = 0; id < static_cast<EdgeId>(edges_.size()); ++id) {
      const Edge& e = edges_[id];
      if (e.source < 0 || e.source >= vertex_count_ || e.target < 0 || e.target >= vertex_count_)
        throw InputError("edge " + std::to_string(id) + " references a vertex out of range");
      if (e.map.dim() != dim_) throw InputError("edge " + std::to_string(id) + " has a map of different dimension");
      out_[e.source].push_back(id);
      in_[e.target].push_back(id);
    }
    for (VertexId v = 0; v < vertex_count_; ++v)
      if (out_[v].empty()) throw InputError("vertex " + std::to_string(v) + " has no outgoing edge");
  }

  /// One-vertex graph whose self-loops are the given maps.
  static GdIfs from_maps(std::span<const Similarity> maps) {
    std::vector<Edge> edges;
    for (const auto& m : maps) edges.push_back({0, 0, m});
    return {1, std::move(edges)};
  }

  int vertex_count() const { return vertex_count_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  int ambient_dim() const { return dim_; }
  const Edge& edge(EdgeId id) const { return edges_.at(static_cast<size_t>(id)); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<EdgeId>& outgoing(VertexId v) const { return out_.at(static_cast<size_t>(v)); }
  const std::vector<EdgeId>& incoming(VertexId v) const { return in_.at(static_cast<size_t>(v)); }

  double max_ratio() const {
    double r = 0.0;
    for (const auto& e : edges_) r = std::max(r, e.map.ratio());
    return r;
  }
  double min_ratio() const {
    double r = 1.0;
    for (const auto& e : edges_) r = std::min(r, e.map.ratio());
    return r;
  }

 private:
  int vertex_count_;
  int dim_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<EdgeId>> out_;
  std::vector<std::vector<EdgeId>> in_;
};

/// A nonempty composable edge sequence with its composite map. The ratio is
/// the product of the edge ratios taken in ascending order, so paths with the
/// same multiset of edge ratios carry bit-identical ratios.
class EdgePath {
 public:
  static EdgePath from_edges(const GdIfs& g, std::vector<EdgeId> edges) {
    if (edges.empty()) throw InputError("edge path must be nonempty");
    for (EdgeId e : edges)
      if (e < 0 || e >= g.edge_count()) throw InputError("edge id " + std::to_string(e) + " out of range");
    for (size_t t = 0; t + 1 < edges.size(); ++t)
      if (g.edge(edges[t]).target != g.edge(edges[t + 1]).source)
        throw InputError("edges " + std::to_string(edges[t]) + " and " + std::to_string(edges[t + 1]) +
                         " are not composable");
    Similarity composite = g.edge(edges.front()).map;
    for (size_t t = 1; t < edges.size(); ++t) composite = compose(composite, g.edge(edges[t]).map);
    std::vector<double> ratios;
    ratios.reserve(edges.size());
    for (EdgeId e : edges) ratios.push_back(g.edge(e).map.ratio());
    const double ratio = canonical_product(std::move(ratios));
    const VertexId src = g.edge(edges.front()).source;
    const VertexId dst = g.edge(edges.back()).target;
    return EdgePath(std::move(edges), src, dst, composite.with_ratio(ratio), ratio);
  }

  static double canonical_product(std::vector<double> factors) {
    std::sort(factors.begin(), factors.end());
    double p = 1.0;
    for (double f : factors) p *= f;
    return p;
  }

  const std::vector<EdgeId>& edges() const { return edges_; }
  VertexId source() const { return source_; }
  VertexId target() const { return target_; }
  const Similarity& composite() const { return composite_; }
  double ratio() const { return ratio_; }
  bool is_cycle() const { return source_ == target_; }
  size_t length() const { return edges_.size(); }

  bool operator==(const EdgePath& o) const { return edges_ == o.edges_; }

 private:
  EdgePath(std::vector<EdgeId> e, VertexId s, VertexId t, Similarity c, double r)
      : edges_(std::move(e)), source_(s), target_(t), composite_(std::move(c)), ratio_(r) {}

  std::vector<EdgeId> edges_;
  VertexId source_;
  VertexId target_;
  Similarity composite_;
  double ratio_;
};

inline EdgePath concat(const GdIfs& g, const EdgePath& p, const EdgePath& q) {
  if (p.target() != q.source()) throw InputError("concat: paths are not composable");
  std::vector<EdgeId> e = p.edges();
  e.insert(e.end(), q.edges().begin(), q.edges().end());
  return EdgePath::from_edges(g, std::move(e));
}

/// p repeated `times` times (times >= 1); p must be a cycle.
inline EdgePath power(const GdIfs& g, const EdgePath& p, int times) {
  if (times < 1) throw InputError("path power must be >= 1");
  if (times > 1 && !p.is_cycle()) throw InputError("only cycles can be iterated");
  std::vector<EdgeId> e;
  e.reserve(p.length() * static_cast<size_t>(times));
  for (int t = 0; t < times; ++t) e.insert(e.end(), p.edges().begin(), p.edges().end());
  return EdgePath::from_edges(g, std::move(e));
}

namespace detail {

inline std::vector<std::vector<bool>> reachability(const GdIfs& g) {
  const int q = g.vertex_count();
  std::vector<std::vector<bool>> reach(q, std::vector<bool>(q, false));
  for (VertexId s = 0; s < q; ++s) {
    std::deque<VertexId> queue{s};
    while (!queue.empty()) {
      const VertexId v = queue.front();
      queue.pop_front();
      for (EdgeId e : g.outgoing(v)) {
        const VertexId w = g.edge(e).target;
        if (!reach[s][w]) {
          reach[s][w] = true;
          queue.push_back(w);
        }
      }
    }
  }
  return reach;
}

// BFS distances (in edges) from every vertex to `to`.
inline std::vector<int> distances_to(const GdIfs& g, VertexId to) {
  std::vector<int> dist(g.vertex_count(), std::numeric_limits<int>::max());
  dist[to] = 0;
  std::deque<VertexId> queue{to};
  while (!queue.empty()) {
    const VertexId v = queue.front();
    queue.pop_front();
    for (EdgeId e : g.incoming(v)) {
      const VertexId u = g.edge(e).source;
      if (dist[u] == std::numeric_limits<int>::max()) {
        dist[u] = dist[v] + 1;
        queue.push_back(u);
      }
    }
  }
  return dist;
}

// Lexicographically smallest shortest path from `from` to `to`; empty when equal.
inline std::vector<EdgeId> shortest_path(const GdIfs& g, VertexId from, VertexId to) {
  const auto dist = distances_to(g, to);
  if (dist[from] == std::numeric_limits<int>::max()) throw PreconditionError("no path between vertices");
  std::vector<EdgeId> path;
  VertexId v = from;
  while (v != to) {
    for (EdgeId e : g.outgoing(v)) {
      if (dist[g.edge(e).target] == dist[v] - 1) {
        path.push_back(e);
        v = g.edge(e).target;
        break;
      }
    }
  }
  return path;
}

}  // namespace detail

inline bool strongly_connected(const GdIfs& g) {
  const auto reach = detail::reachability(g);
  for (VertexId i = 0; i < g.vertex_count(); ++i)
    for (VertexId l = 0; l < g.vertex_count(); ++l)
      if (i != l && !reach[i][l]) return false;
  return true;
}

inline void require_strongly_connected(const GdIfs& g) {
  if (!strongly_connected(g)) throw NotStronglyConnected();
}

/// Depth-first enumeration of the first extensions of `prefix` (or of the
/// empty path at `from`) whose weighted ratio ratio * weight[target] drops
/// below `ceil`. Every proper extension prefix has weighted ratio >= ceil.
/// The visitor returns false to stop early.
inline void for_each_stopping_path(const GdIfs& g, VertexId from, std::span<const double> weight, double ceil,
                                   const std::optional<EdgePath>& prefix,
                                   const std::function<bool(const EdgePath&)>& visit) {
  std::vector<EdgeId> stack_edges = prefix ? prefix->edges() : std::vector<EdgeId>{};
  const VertexId start = prefix ? prefix->target() : from;
  if (prefix && prefix->source() != from) throw InputError("prefix does not start at the given vertex");
  const double start_ratio = prefix ? prefix->ratio() : 1.0;

  bool stop = false;
  std::function<void(VertexId, double)> dfs = [&](VertexId v, double r) {
    for (EdgeId e : g.outgoing(v)) {
      if (stop) return;
      const Edge& edge = g.edge(e);
      const double nr = r * edge.map.ratio();
      stack_edges.push_back(e);
      if (nr * weight[edge.target] < ceil) {
        if (!visit(EdgePath::from_edges(g, stack_edges))) stop = true;
      } else {
        dfs(edge.target, nr);
      }
      stack_edges.pop_back();
    }
  };
  dfs(start, start_ratio);
}

/// Paths from `from` (extending `prefix`) with ratio in [ratio_floor, ratio_ceil)
/// whose every proper prefix has ratio >= ratio_ceil.
inline std::vector<EdgePath> enumerate_paths(const GdIfs& g, VertexId from, double ratio_floor, double ratio_ceil,
                                             const std::optional<EdgePath>& prefix = std::nullopt) {
  if (!(ratio_floor > 0.0 && ratio_floor < ratio_ceil && ratio_ceil <= 1.0))
    throw InputError("enumerate_paths: need 0 < floor < ceil <= 1");
  const std::vector<double> ones(static_cast<size_t>(g.vertex_count()), 1.0);
  std::vector<EdgePath> out;
  for_each_stopping_path(g, from, ones, ratio_ceil, prefix, [&](const EdgePath& p) {
    if (p.ratio() >= ratio_floor) out.push_back(p);
    return true;
  });
  return out;
}

/// Fixed shortest paths b_i (vertex i -> j) and a_i (j -> i); nullopt encodes
/// the empty path at i == j.
struct ReturnPaths {
  VertexId base;
  std::vector<std::optional<EdgePath>> to_base;    // b_i
  std::vector<std::optional<EdgePath>> from_base;  // a_i

  OrthogonalTransform to_base_transform(VertexId i, int d) const {
    return to_base[i] ? to_base[i]->composite().rotation() : OrthogonalTransform::identity(d);
  }
  OrthogonalTransform from_base_transform(VertexId i, int d) const {
    return from_base[i] ? from_base[i]->composite().rotation() : OrthogonalTransform::identity(d);
  }
  double to_base_ratio(VertexId i) const { return to_base[i] ? to_base[i]->ratio() : 1.0; }
};

inline ReturnPaths return_paths(const GdIfs& g, VertexId j) {
  require_strongly_connected(g);
  if (j < 0 || j >= g.vertex_count()) throw InputError("vertex out of range");
  ReturnPaths rp{j, {}, {}};
  for (VertexId i = 0; i < g.vertex_count(); ++i) {
    if (i == j) {
      rp.to_base.emplace_back(std::nullopt);
      rp.from_base.emplace_back(std::nullopt);
      continue;
    }
    rp.to_base.emplace_back(EdgePath::from_edges(g, detail::shortest_path(g, i, j)));
    rp.from_base.emplace_back(EdgePath::from_edges(g, detail::shortest_path(g, j, i)));
  }
  return rp;
}

struct GeneratorSet {
  VertexId base;
  std::vector<EdgePath> cycles;
  std::vector<OrthogonalTransform> transforms;
};

namespace detail {

inline std::optional<EdgePath> join(const GdIfs& g, std::initializer_list<const std::vector<EdgeId>*> parts) {
  std::vector<EdgeId> e;
  for (const auto* p : parts) e.insert(e.end(), p->begin(), p->end());
  if (e.empty()) return std::nullopt;
  return EdgePath::from_edges(g, std::move(e));
}

inline const std::vector<EdgeId>& edges_or_empty(const std::optional<EdgePath>& p) {
  static const std::vector<EdgeId> empty;
  return p ? p->edges() : empty;
}

}  // namespace detail

/// All candidate generator cycles a_i * e * b_l and a_i * b_i at `j`, before
/// pruning; the empty cycle (i == j in a_i * b_i) is omitted.
inline std::vector<EdgePath> candidate_generator_cycles(const GdIfs& g, const ReturnPaths& rp) {
  std::vector<EdgePath> out;
  for (EdgeId id = 0; id < g.edge_count(); ++id) {
    const Edge& e = g.edge(id);
    const std::vector<EdgeId> mid{id};
    out.push_back(*detail::join(g, {&detail::edges_or_empty(rp.from_base[e.source]), &mid,
                                    &detail::edges_or_empty(rp.to_base[e.target])}));
  }
  for (VertexId i = 0; i < g.vertex_count(); ++i) {
    auto c = detail::join(g, {&detail::edges_or_empty(rp.from_base[i]), &detail::edges_or_empty(rp.to_base[i])});
    if (c) out.push_back(*c);
  }
  return out;
}

inline GeneratorSet generator_cycles(const GdIfs& g, VertexId j) {
  const ReturnPaths rp = return_paths(g, j);
  const int d = g.ambient_dim();
  GeneratorSet gen{j, {}, {}};
  const auto id = OrthogonalTransform::identity(d);
  for (auto& c : candidate_generator_cycles(g, rp)) {
    const auto& t = c.composite().rotation();
    if (operator_distance(t, id) <= 1e-9) continue;
    bool dup = false;
    for (const auto& kept : gen.transforms) dup = dup || operator_distance(t, kept) <= 1e-9;
    if (dup) continue;
    gen.transforms.push_back(t);
    gen.cycles.push_back(std::move(c));
  }
  return gen;
}

/// Re-expresses T_e of a cycle at rp.base as the product of generator
/// transforms T_{a_i * b_i}^{-1} T_{a_i * e_t * b_l} along the cycle.
inline OrthogonalTransform factor_cycle_transform(const GdIfs& g, const ReturnPaths& rp, const EdgePath& cycle) {
  if (!cycle.is_cycle() || cycle.source() != rp.base) throw InputError("factorization needs a cycle at the base vertex");
  const int d = g.ambient_dim();
  auto transform_of = [&](std::initializer_list<const std::vector<EdgeId>*> parts) {
    auto p = detail::join(g, parts);
    return p ? p->composite().rotation() : OrthogonalTransform::identity(d);
  };
  OrthogonalTransform acc = OrthogonalTransform::identity(d);
  for (EdgeId id : cycle.edges()) {
    const Edge& e = g.edge(id);
    const std::vector<EdgeId> mid{id};
    const auto& a = detail::edges_or_empty(rp.from_base[e.source]);
    const auto& b_src = detail::edges_or_empty(rp.to_base[e.source]);
    const auto& b_dst = detail::edges_or_empty(rp.to_base[e.target]);
    acc = acc * transform_of({&a, &b_src}).inverse() * transform_of({&a, &mid, &b_dst});
  }
  return acc;
}

}  // namespace gdifs
