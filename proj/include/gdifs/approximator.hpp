#pragma once

// Extraction of self-similar subsystems (SS-IFS) with the strong separation
// condition from the cycles at one vertex of a graph-directed system.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "gdifs/combinatorics.hpp"
#include "gdifs/dimension.hpp"
#include "gdifs/graph.hpp"
#include "gdifs/group.hpp"
#include "gdifs/separation.hpp"

namespace gdifs {

/// An SS-IFS whose maps are composites of cycles at one vertex.
struct SsIfs {
  std::vector<Similarity> maps;
  std::vector<EdgePath> provenance;

  size_t size() const { return maps.size(); }
  std::vector<double> ratios() const {
    std::vector<double> r;
    r.reserve(maps.size());
    for (const auto& m : maps) r.push_back(m.ratio());
    return r;
  }
  std::vector<OrthogonalTransform> transforms() const {
    std::vector<OrthogonalTransform> t;
    t.reserve(maps.size());
    for (const auto& m : maps) t.push_back(m.rotation());
    return t;
  }
  void push(const EdgePath& p) {
    maps.push_back(p.composite());
    provenance.push_back(p);
  }
};

enum class GroupMode { dense_subgroup, epsilon_close, exact, planar_so2 };

inline const char* to_string(GroupMode m) {
  switch (m) {
    case GroupMode::dense_subgroup: return "dense_subgroup";
    case GroupMode::epsilon_close: return "epsilon_close";
    case GroupMode::exact: return "exact";
    case GroupMode::planar_so2: return "planar_so2";
  }
  return "?";
}

/// Short name matching the CLI --mode values.
inline const char* mode_name(GroupMode m) {
  switch (m) {
    case GroupMode::dense_subgroup: return "dense";
    case GroupMode::epsilon_close: return "uniform";
    case GroupMode::exact: return "exact";
    case GroupMode::planar_so2: return "planar";
  }
  return "?";
}

struct GroupReport {
  GroupMode mode = GroupMode::dense_subgroup;
  std::optional<OrthogonalTransform> target;
  double resolution = 0.0;  // epsilon used for both nets
  size_t reference_net_size = 0;
  bool reference_finite = false;
  bool reference_truncated = false;
  size_t output_net_size = 0;
  bool output_finite = false;
  // Largest distance from an element of the reference net to the output net.
  double coverage_distance = 0.0;
  // Largest distance from an output transform to the target (uniform, exact).
  double target_distance = 0.0;
  double group_gap = std::numeric_limits<double>::infinity();  // finite groups
  double snap_radius = 0.0;
  bool heuristic = false;  // some power was chosen without an order proof
  bool sampled = false;    // the word class was subsampled
};

struct CoveringStep {
  double delta = 0.0;
  size_t selected = 0;
  double dimension = 0.0;
  double lower_bound = std::numeric_limits<double>::quiet_NaN();
};

struct ExtractionCertificate {
  VertexId vertex = 0;
  double epsilon = 0.0;
  DimensionResult achieved;
  DimensionResult reference;
  SeparationCertificate separation;
  GroupReport group;
  std::optional<double> uniform_ratio;
  int power_floor = 0;
  std::vector<long> powers;
  std::vector<CoveringStep> covering;
  int class_length = 0;
  bool partial = false;  // dimension target not reached within the budgets
};

struct Extraction {
  SsIfs system;
  ExtractionCertificate certificate;
};

struct ExtractionOptions {
  int max_depth = 12;               // refinement depth for disjointness checks
  int greedy_depth = 4;             // refinement depth inside the greedy packing
  size_t word_budget = 1'000'000;   // words examined per class step
  size_t group_budget = 4096;       // elements per group closure
  size_t cycle_budget = 100'000;    // paths examined when searching cycles
  size_t covering_budget = 200'000; // candidate cylinders per scale
  int max_cycle_length = 64;
  int corrector_length = 40;
  long max_order = 10'000;
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
};

/// Data shared by the extraction routines for one system.
struct SystemContext {
  const GdIfs* graph = nullptr;
  Enclosure enclosure;
  DiameterBounds diameters;
  DimensionResult reference;

  static SystemContext make(const GdIfs& g) {
    require_strongly_connected(g);
    SystemContext ctx;
    ctx.graph = &g;
    ctx.enclosure = compute_enclosure(g);
    ctx.diameters = diameter_bounds(g, ctx.enclosure, 8);
    ctx.reference = mauldin_williams_dimension(g);
    return ctx;
  }
};

namespace detail {

// Visits the cycles at j in order of increasing length (lexicographic within a
// length) until `visit` returns false, the length cap is reached, or more than
// `budget` paths were generated.
template <class F>
void for_each_cycle(const GdIfs& g, VertexId j, int max_length, size_t budget, F&& visit) {
  struct Partial {
    std::vector<EdgeId> edges;
    VertexId end;
  };
  std::vector<Partial> level{{{}, j}};
  size_t generated = 0;
  for (int len = 1; len <= max_length && !level.empty(); ++len) {
    std::vector<Partial> next;
    for (const auto& p : level) {
      for (EdgeId id : g.outgoing(p.end)) {
        if (++generated > budget) return;
        Partial q{p.edges, g.edge(id).target};
        q.edges.push_back(id);
        if (q.end == j && !visit(EdgePath::from_edges(g, q.edges))) return;
        next.push_back(std::move(q));
      }
    }
    level = std::move(next);
  }
}

inline double min_distance_to(const Vec& x, const std::vector<Vec>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) best = std::min(best, (x - p).norm());
  return best;
}

inline bool same_ratio(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(a, b); }

}  // namespace detail

/// Two cycles at j with distinct fixed points. The first is the shortest
/// cycle; the second is the first cycle (by length) whose fixed point is
/// farther than max(1e-6 diam K_j, 1e-12) from it.
inline std::pair<EdgePath, EdgePath> find_nonsingleton_cycles(const SystemContext& ctx, VertexId j,
                                                              const ExtractionOptions& opt = {}) {
  const GdIfs& g = *ctx.graph;
  const double threshold = std::max(1e-6 * ctx.diameters.upper.at(static_cast<size_t>(j)), 1e-12);
  std::optional<EdgePath> first;
  Vec x1;
  std::optional<EdgePath> second;
  detail::for_each_cycle(g, j, opt.max_cycle_length, opt.cycle_budget, [&](const EdgePath& c) {
    const Vec x = fixed_point(c.composite()).point;
    if (!first) {
      first = c;
      x1 = x;
      return true;
    }
    if ((x - x1).norm() > threshold) {
      second = c;
      return false;
    }
    return true;
  });
  if (!second)
    throw PreconditionError("attractor at vertex " + std::to_string(j) +
                            " appears to be a single point: no cycle with a distinct fixed point found");
  return {*first, *second};
}

/// Replaces cycles 3.. by e1^k * c_i or e2^k * c_i until all fixed points are
/// pairwise at least `threshold` apart. The first two must already be.
inline std::vector<EdgePath> separate_fixed_points(const GdIfs& g, const std::vector<EdgePath>& cycles,
                                                   double threshold = 1e-8) {
  if (cycles.size() < 2) throw InputError("separate_fixed_points: need at least two cycles");
  std::vector<EdgePath> out{cycles[0], cycles[1]};
  std::vector<Vec> fps{fixed_point(cycles[0].composite()).point, fixed_point(cycles[1].composite()).point};
  if ((fps[0] - fps[1]).norm() < threshold)
    throw PreconditionError("separate_fixed_points: the first two cycles share a fixed point");
  for (size_t i = 2; i < cycles.size(); ++i) {
    Vec x = fixed_point(cycles[i].composite()).point;
    if (detail::min_distance_to(x, fps) >= threshold) {
      out.push_back(cycles[i]);
      fps.push_back(std::move(x));
      continue;
    }
    bool placed = false;
    for (int k = 1; k <= 64 && !placed; ++k) {
      for (size_t b = 0; b < 2 && !placed; ++b) {
        EdgePath cand = concat(g, power(g, cycles[b], k), cycles[i]);
        Vec y = fixed_point(cand.composite()).point;
        if (detail::min_distance_to(y, fps) >= threshold) {
          out.push_back(std::move(cand));
          fps.push_back(std::move(y));
          placed = true;
        }
      }
    }
    if (!placed) throw InternalError("separate_fixed_points: could not move fixed point " + std::to_string(i));
  }
  return out;
}

struct DensePower {
  long power = 1;
  bool heuristic = false;
  RotationOrder order;
};

/// Exponent k >= n_min with <T^k> dense in (or equal to) the closure of <T>.
/// Finite order n: smallest k coprime to n. Infinite order: n_min, made odd
/// for orientation-reversing T so that T^k stays in the same coset. In
/// dimension >= 4 the infinite-order case is flagged as heuristic.
inline DensePower dense_power(const OrthogonalTransform& t, long n_min, long max_order = 10'000) {
  if (n_min < 1) throw InputError("dense_power: n_min must be >= 1");
  DensePower out;
  out.order = rotation_order(t, max_order);
  if (out.order.finite) {
    long k = n_min;
    while (std::gcd(k, out.order.order) != 1) ++k;
    out.power = k;
    return out;
  }
  long k = n_min;
  if (!t.preserves_orientation() && k % 2 == 0) ++k;
  out.power = k;
  out.heuristic = t.dim() >= 4;
  return out;
}

struct CoveringResult {
  SsIfs system;
  DimensionResult dimension;
  std::vector<CoveringStep> trace;
  bool reached = false;
};

/// Greedy disjoint packing of stopping-time cylinders inside the cylinder of
/// `root` (a cycle at j; nullopt packs all of K_j), each closed up by its
/// return path. Pieces must also be disjoint from the cylinders of
/// `companions` (cycles at j that the caller merges in), and the dimension is
/// that of the union. The scale delta halves until the similarity dimension
/// exceeds `target_dim` or delta drops below 1e-12 diam K_j; the best packing
/// seen is returned either way.
inline CoveringResult extract_covering_subsystem(const SystemContext& ctx, VertexId j,
                                                 const std::optional<EdgePath>& root, double target_dim,
                                                 const ExtractionOptions& opt = {}, const SsIfs& companions = {}) {
  const GdIfs& g = *ctx.graph;
  if (root && (!root->is_cycle() || root->source() != j))
    throw InputError("covering root must be a cycle at the base vertex");
  for (const auto& p : companions.provenance)
    if (!p.is_cycle() || p.source() != j) throw InputError("companion maps must be cycles at the base vertex");
  find_nonsingleton_cycles(ctx, j, opt);  // a single point cannot be packed
  const ReturnPaths rp = return_paths(g, j);
  std::vector<double> weight = ctx.diameters.upper;
  for (auto& w : weight) w = std::max(w, 1e-300);
  const double dj = weight[static_cast<size_t>(j)];
  double c_min = std::numeric_limits<double>::infinity();
  for (VertexId i = 0; i < g.vertex_count(); ++i) c_min = std::min(c_min, rp.to_base_ratio(i) * dj / weight[i]);
  const double r_min = g.min_ratio();

  struct Piece {
    EdgePath path;
    Vec center;
    double radius;
  };
  auto piece_of = [&](const EdgePath& p) {
    const Ball& b = ctx.enclosure.at(p.target());
    return Piece{p, p.composite().apply(b.center), p.ratio() * b.radius};
  };

  CoveringResult best;
  best.dimension.value = -1.0;
  double delta = (root ? root->ratio() : 1.0) * dj;
  while (true) {
    delta *= 0.5;
    if (delta < 1e-12 * dj) break;
    std::vector<Piece> pieces;
    for (const auto& p : companions.provenance) pieces.push_back(piece_of(p));
    const size_t first = pieces.size();
    bool overflow = false;
    for_each_stopping_path(g, j, weight, delta, root, [&](const EdgePath& p) {
      pieces.push_back(piece_of(p));
      overflow = pieces.size() - first > opt.covering_budget;
      return !overflow;
    });
    if (overflow) break;

    // Greedy maximal disjoint family in enumeration order, seeded with the
    // companions; selected pieces are kept sorted by first coordinate.
    std::multimap<double, size_t> selected;
    double sel_rmax = 0.0;
    std::vector<size_t> chosen;
    for (size_t c = 0; c < pieces.size(); ++c) {
      const Piece& pc = pieces[c];
      bool ok = true;
      if (c >= first) {
        auto it = selected.lower_bound(pc.center(0) - pc.radius - sel_rmax);
        const auto end = selected.upper_bound(pc.center(0) + pc.radius + sel_rmax);
        for (; it != end && ok; ++it) {
          const Piece& ps = pieces[it->second];
          if ((pc.center - ps.center).norm() - pc.radius - ps.radius > 0.0) continue;
          const auto r = cylinders_disjoint(g, pc.path, ps.path, ctx.enclosure, opt.greedy_depth, 20000);
          ok = r.verdict == Verdict::disjoint;
        }
      }
      if (!ok) continue;
      selected.emplace(pc.center(0), c);
      sel_rmax = std::max(sel_rmax, pc.radius);
      if (c >= first) chosen.push_back(c);
    }

    CoveringResult cur;
    for (size_t c : chosen) {
      const EdgePath& f = pieces[c].path;
      const auto& back = rp.to_base[f.target()];
      cur.system.push(back ? concat(g, f, *back) : f);
    }
    std::vector<double> ratios = cur.system.ratios();
    for (const auto& mp : companions.maps) ratios.push_back(mp.ratio());
    cur.dimension = ratios.empty() ? DimensionResult{} : similarity_dimension(ratios);
    CoveringStep step{delta, chosen.size(), cur.dimension.value};
    const double arg = c_min * r_min * delta / dj;
    if (chosen.size() > 1 && arg < 1.0) step.lower_bound = std::log(1.0 / static_cast<double>(chosen.size())) / std::log(arg);
    best.trace.push_back(step);
    if (cur.dimension.value > best.dimension.value) {
      best.system = std::move(cur.system);
      best.dimension = cur.dimension;
    }
    if (best.dimension.value > target_dim) {
      best.reached = true;
      break;
    }
  }
  return best;
}

namespace detail {

// Distinct transforms (at 1e-9) of a system, capped at `cap`, earlier maps first.
inline std::vector<OrthogonalTransform> distinct_transforms(const std::vector<OrthogonalTransform>& ts, size_t cap) {
  std::vector<OrthogonalTransform> out;
  for (const auto& t : ts) {
    if (out.size() >= cap) break;
    bool dup = false;
    for (const auto& o : out) dup = dup || operator_distance(o, t) <= 1e-9;
    if (!dup) out.push_back(t);
  }
  return out;
}

// Largest distance from an element of `reference` to the net `output`,
// measured exactly up to `radius` and by linear scan beyond it.
inline double coverage_distance(const EpsilonNet& reference, const EpsilonNet& output, double radius) {
  TransformIndex index(radius);
  for (const auto& e : output.elements) index.insert(e);
  double worst = 0.0;
  for (const auto& e : reference.elements) {
    const long hit = index.find_within(e, radius);
    const double d = hit >= 0 ? operator_distance(index.items()[static_cast<size_t>(hit)], e) : index.nearest(e).second;
    worst = std::max(worst, d);
  }
  return worst;
}

inline void fill_group_report(GroupReport& rep, const GdIfs& g, VertexId j, const SsIfs& sys, double eps,
                              const ExtractionOptions& opt) {
  const GeneratorSet gen = generator_cycles(g, j);
  const int d = g.ambient_dim();
  const EpsilonNet ref = group_closure(gen.transforms, d, eps, opt.group_budget);
  const EpsilonNet out = group_closure(distinct_transforms(sys.transforms(), 64), d, eps, opt.group_budget);
  rep.resolution = eps;
  rep.reference_net_size = ref.elements.size();
  rep.reference_finite = ref.finite_group;
  rep.reference_truncated = ref.truncated;
  rep.output_net_size = out.elements.size();
  rep.output_finite = out.finite_group;
  rep.coverage_distance = coverage_distance(ref, out, eps);
  if (ref.finite_group) rep.group_gap = ref.min_separation();
}

inline SeparationCertificate require_ssc(const SystemContext& ctx, const SsIfs& sys, int max_depth) {
  auto res = verify_ssc(*ctx.graph, ctx.enclosure, sys.provenance, max_depth);
  if (!res.ok())
    throw InternalError("extracted system failed the separation check on maps " + std::to_string(res.failure->a) +
                        " and " + std::to_string(res.failure->b) + " (" + to_string(res.failure->verdict) + ")");
  return *res.certificate;
}

inline void check_epsilon(const SystemContext& ctx, VertexId j, double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InputError("epsilon must be positive");
  if (j < 0 || j >= ctx.graph->vertex_count()) throw InputError("vertex " + std::to_string(j) + " out of range");
}

}  // namespace detail

/// SS-IFS at vertex j with SSC, dimension above reference - eps and
/// transformation group dense in that of the cycles at j.
inline Extraction extract_dense_group(const SystemContext& ctx, VertexId j, double eps,
                                      const ExtractionOptions& opt = {}) {
  detail::check_epsilon(ctx, j, eps);
  const GdIfs& g = *ctx.graph;
  const auto [e1, e2] = find_nonsingleton_cycles(ctx, j, opt);
  const GeneratorSet gen = generator_cycles(g, j);
  std::vector<EdgePath> cycles{e1, e2};
  for (const auto& c : gen.cycles)
    if (!(c == e1) && !(c == e2)) cycles.push_back(c);
  const std::vector<EdgePath> sep = separate_fixed_points(g, cycles);

  std::vector<Vec> fps;
  double r_max = 0.0;
  for (const auto& c : sep) {
    fps.push_back(fixed_point(c.composite()).point);
    r_max = std::max(r_max, c.ratio());
  }
  double d_min = std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < fps.size(); ++a)
    for (size_t b = a + 1; b < fps.size(); ++b) d_min = std::min(d_min, (fps[a] - fps[b]).norm());
  const Ball& bj = ctx.enclosure.at(j);
  double reach = 0.0;
  for (const auto& x : fps) reach = std::max(reach, bj.radius + (bj.center - x).norm());
  const double dj = ctx.diameters.upper.at(static_cast<size_t>(j));
  // Smallest N with r_max^N * scale < d_min / 2; the proof only needs the
  // diameter, the ball version also separates the enclosure images.
  auto floor_for = [&](double scale) {
    int n = 1;
    while (std::pow(r_max, n) * scale >= 0.5 * d_min) ++n;
    return n;
  };
  const int n_floor = std::max(floor_for(dj), floor_for(reach));

  Extraction out;
  auto& cert = out.certificate;
  cert.vertex = j;
  cert.epsilon = eps;
  cert.reference = ctx.reference;
  cert.power_floor = n_floor;
  cert.group.mode = GroupMode::dense_subgroup;
  SsIfs candidates;
  for (const auto& c : sep) {
    const DensePower dp = dense_power(c.composite().rotation(), n_floor, opt.max_order);
    cert.powers.push_back(dp.power);
    cert.group.heuristic = cert.group.heuristic || dp.heuristic;
    candidates.push(power(g, c, static_cast<int>(dp.power)));
  }
  const double target = ctx.reference.value - eps;
  SsIfs system = candidates;
  if (similarity_dimension(candidates.ratios()).value <= target) {
    // Pack the part of K_j outside the power cylinders.
    CoveringResult cov = extract_covering_subsystem(ctx, j, std::nullopt, target, opt, candidates);
    cert.covering = cov.trace;
    cert.partial = !cov.reached;
    for (size_t i = 0; i < cov.system.size(); ++i) system.push(cov.system.provenance[i]);
  }
  cert.separation = detail::require_ssc(ctx, system, opt.max_depth);
  cert.achieved = similarity_dimension(system.ratios());
  cert.partial = cert.achieved.value <= target;
  detail::fill_group_report(cert.group, g, j, system, eps, opt);
  out.system = std::move(system);
  return out;
}

namespace detail {

// Suffix word appended to every word of the chosen class, given the class
// representative and the cell radius around it (0 for exact classes);
// nullopt if no suitable suffix exists.
using SuffixFn = std::function<std::optional<std::vector<int>>(const OrthogonalTransform&, double)>;

struct ClassStep {
  SsIfs system;
  int k = 0;
  bool sampled = false;
  bool reached = false;
  double dimension = -1.0;
};

inline EdgePath word_path(const GdIfs& g, const SsIfs& base, const std::vector<int>& word) {
  std::vector<EdgeId> edges;
  for (int l : word) {
    const auto& e = base.provenance[static_cast<size_t>(l)].edges();
    edges.insert(edges.end(), e.begin(), e.end());
  }
  return EdgePath::from_edges(g, std::move(edges));
}

// Shortest word w over the base letters (possibly empty) with accept(T_w).
// States are deduplicated at `eta`.
inline std::optional<std::vector<int>> word_search(const SsIfs& base, int d, double eta, int max_length,
                                                   size_t max_states,
                                                   const std::function<bool(const OrthogonalTransform&)>& accept) {
  const auto id = OrthogonalTransform::identity(d);
  if (accept(id)) return std::vector<int>{};
  const auto letters = base.transforms();
  struct State {
    std::vector<int> word;
    OrthogonalTransform t;
  };
  std::vector<State> level{{{}, id}};
  TransformIndex seen(eta);
  seen.insert(id);
  for (int len = 1; len <= max_length && !level.empty(); ++len) {
    std::vector<State> next;
    for (const auto& st : level) {
      for (size_t l = 0; l < letters.size(); ++l) {
        OrthogonalTransform t = st.t * letters[l];
        std::vector<int> w = st.word;
        w.push_back(static_cast<int>(l));
        if (accept(t)) return w;
        if (seen.find_within(t, eta) >= 0 || seen.size() >= max_states) continue;
        seen.insert(t);
        next.push_back({std::move(w), std::move(t)});
      }
    }
    level = std::move(next);
  }
  return std::nullopt;
}

// Letters grouped by ratio, and also by transform when requested; letters of
// one type are then interchangeable for the ratio (and linear part) of a word.
struct LetterTypes {
  std::vector<double> ratio;
  std::vector<OrthogonalTransform> transform;
  std::vector<std::vector<int>> letters;
  std::vector<size_t> type_of;  // per letter
  bool commutative = true;

  size_t size() const { return ratio.size(); }
};

inline LetterTypes letter_types(const SsIfs& base, bool split_by_transform) {
  LetterTypes lt;
  for (size_t i = 0; i < base.size(); ++i) {
    const Similarity& mp = base.maps[i];
    size_t t = 0;
    while (t < lt.size() &&
           !(same_ratio(lt.ratio[t], mp.ratio()) &&
             (!split_by_transform || operator_distance(lt.transform[t], mp.rotation()) <= 1e-9)))
      ++t;
    if (t == lt.size()) {
      lt.ratio.push_back(mp.ratio());
      lt.transform.push_back(mp.rotation());
      lt.letters.emplace_back();
    }
    lt.letters[t].push_back(static_cast<int>(i));
    lt.type_of.push_back(t);
  }
  lt.commutative = split_by_transform;
  return lt;
}

// Count vectors tried at length k: the whole Chebyshev window when there are
// few types, otherwise only the rounded choice.
inline std::vector<int> rounded_counts(std::span<const double> p, int k) {
  // Largest-remainder rounding of k p.
  std::vector<int> c(p.size());
  std::vector<std::pair<double, size_t>> rem;
  int used = 0;
  for (size_t l = 0; l < p.size(); ++l) {
    c[l] = static_cast<int>(std::floor(k * p[l]));
    used += c[l];
    rem.emplace_back(k * p[l] - c[l], l);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (size_t i = 0; used < k; ++i, ++used) ++c[rem[i % rem.size()].second];
  return c;
}

inline std::vector<std::vector<int>> count_candidates(std::span<const double> p, int k) {
  if (p.size() > 6) return {rounded_counts(p, k)};
  const size_t m = p.size();
  const double w = std::sqrt(2.0 * k);
  std::vector<std::vector<int>> out;
  std::vector<int> cur(m);
  auto rec = [&](auto&& self, size_t l, int remaining) -> void {
    if (l + 1 == m) {
      if (std::abs(remaining - k * p[l]) < w) {
        cur[l] = remaining;
        out.push_back(cur);
      }
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      if (std::abs(v - k * p[l]) >= w) continue;
      cur[l] = v;
      self(self, l + 1, remaining - v);
    }
  };
  rec(rec, 0, k);
  return out;
}

// Words with the given type counts: all of them, or a deterministic sample of
// `cap` distinct words when the class is larger than `cap`.
inline bool collect_class(const LetterTypes& lt, const std::vector<Mat>& letter_mats, const std::vector<int>& counts,
                          int k, int d, size_t cap, std::uint64_t seed, std::vector<int>& flat, std::vector<Mat>& mats) {
  double log_total = log_multinomial(k, counts);
  for (size_t t = 0; t < lt.size(); ++t) log_total += counts[t] * std::log(static_cast<double>(lt.letters[t].size()));
  const bool sample = log_total > std::log(static_cast<double>(cap));
  if (!sample) {
    std::vector<int> remaining = counts, cur;
    auto rec = [&](auto&& self, const Mat& acc) -> void {
      if (static_cast<int>(cur.size()) == k) {
        flat.insert(flat.end(), cur.begin(), cur.end());
        mats.push_back(acc);
        return;
      }
      for (size_t t = 0; t < lt.size(); ++t) {
        if (remaining[t] == 0) continue;
        --remaining[t];
        for (int l : lt.letters[t]) {
          cur.push_back(l);
          self(self, Mat(acc * letter_mats[static_cast<size_t>(l)]));
          cur.pop_back();
        }
        ++remaining[t];
      }
    };
    rec(rec, Mat::Identity(d, d));
    return false;
  }
  std::mt19937_64 rng(seed);
  std::vector<int> types;
  for (size_t t = 0; t < lt.size(); ++t) types.insert(types.end(), static_cast<size_t>(counts[t]), static_cast<int>(t));
  std::unordered_set<std::string> seen;
  for (size_t attempt = 0; attempt < 4 * cap && mats.size() < cap; ++attempt) {
    std::shuffle(types.begin(), types.end(), rng);
    std::vector<int> w;
    Mat acc = Mat::Identity(d, d);
    for (int t : types) {
      const auto& pool = lt.letters[static_cast<size_t>(t)];
      w.push_back(pool[std::uniform_int_distribution<size_t>(0, pool.size() - 1)(rng)]);
      acc = acc * letter_mats[static_cast<size_t>(w.back())];
    }
    std::string key(reinterpret_cast<const char*>(w.data()), w.size() * sizeof(int));
    if (!seen.insert(std::move(key)).second) continue;
    flat.insert(flat.end(), w.begin(), w.end());
    mats.push_back(std::move(acc));
  }
  return true;
}

// Every word of length k when there are at most `cap`, otherwise `cap` draws
// with letter l at probability p[l], duplicates dropped. The stream is
// deterministic in `seed`. Returns whether it was sampled.
template <class Visit>
bool for_each_word(const std::vector<Mat>& letter_mats, const std::vector<double>& p, int k, int d, size_t cap,
                   std::uint64_t seed, Visit&& visit) {
  const size_t m = letter_mats.size();
  const bool sample = static_cast<double>(k) * std::log(static_cast<double>(m)) > std::log(static_cast<double>(cap));
  std::vector<int> w;
  if (!sample) {
    auto rec = [&](auto&& self, const Mat& acc) -> void {
      if (static_cast<int>(w.size()) == k) {
        visit(static_cast<const std::vector<int>&>(w), acc);
        return;
      }
      for (size_t l = 0; l < m; ++l) {
        w.push_back(static_cast<int>(l));
        self(self, Mat(acc * letter_mats[l]));
        w.pop_back();
      }
    };
    rec(rec, Mat::Identity(d, d));
    return false;
  }
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick(p.begin(), p.end());
  std::unordered_set<std::uint64_t> seen;
  for (size_t draw = 0; draw < cap; ++draw) {
    w.clear();
    Mat acc = Mat::Identity(d, d);
    std::uint64_t h = 14695981039346656037ULL;
    for (int i = 0; i < k; ++i) {
      const int l = pick(rng);
      w.push_back(l);
      acc = acc * letter_mats[static_cast<size_t>(l)];
      h = (h ^ static_cast<std::uint64_t>(l + 1)) * 1099511628211ULL;
    }
    if (!seen.insert(h).second) continue;
    visit(static_cast<const std::vector<int>&>(w), static_cast<const Mat&>(acc));
  }
  return true;
}

// Words of length k split into cells by letter-type counts and transform,
// each cell closed by the suffix chosen for its representative. Cells come
// from leader clustering at `cell_radius`; when the letter transforms commute
// every class is a single exact cell and is scored without enumeration. The
// cell with the largest similarity dimension is kept, and k grows until that
// exceeds `dim_target`.
inline ClassStep class_step(const GdIfs& g, const SsIfs& base, double cell_radius, const SuffixFn& suffix,
                            double dim_target, const ExtractionOptions& opt) {
  const int d = g.ambient_dim();
  const double s = similarity_dimension(base.ratios()).value;
  // Commuting letters make each class one exact cell; otherwise classes only
  // fix the ratio and the cells split them.
  bool commutative = true;
  for (size_t a = 0; a < base.size() && commutative; ++a)
    for (size_t b = a + 1; b < base.size() && commutative; ++b) {
      const Mat& x = base.maps[a].rotation().matrix();
      const Mat& y = base.maps[b].rotation().matrix();
      commutative = detail::op_norm(x * y - y * x) <= 1e-9;
    }
  const LetterTypes lt = letter_types(base, commutative);
  std::vector<Mat> letter_mats;
  for (const auto& mp : base.maps) letter_mats.push_back(mp.rotation().matrix());
  const size_t m = lt.size();
  std::vector<double> p(m);
  double total = 0.0;
  for (size_t t = 0; t < m; ++t) total += p[t] = static_cast<double>(lt.letters[t].size()) * std::pow(lt.ratio[t], s);
  for (auto& x : p) x /= total;
  std::vector<double> p_letter;
  for (const auto& mp : base.maps) p_letter.push_back(std::pow(mp.ratio(), s));
  const double log_cap = std::log(static_cast<double>(opt.word_budget));

  auto suffix_log_ratio = [&](const std::vector<int>& w) {
    double v = 0.0;
    for (int l : w) v += std::log(base.maps[static_cast<size_t>(l)].ratio());
    return v;
  };
  auto assemble = [&](int k, const std::vector<int>& flat, const std::vector<long>& cell, long lead,
                      const std::vector<int>& suf) {
    SsIfs sys;
    for (size_t w = 0; w < cell.size(); ++w) {
      if (cell[w] != lead) continue;
      std::vector<int> word(flat.begin() + static_cast<long>(w * static_cast<size_t>(k)),
                            flat.begin() + static_cast<long>((w + 1) * static_cast<size_t>(k)));
      word.insert(word.end(), suf.begin(), suf.end());
      sys.push(word_path(g, base, word));
    }
    return sys;
  };

  ClassStep best;
  double previous = -1.0;
  for (int k = 1; k <= 64; ++k) {
    struct Choice {
      std::vector<int> counts;
      std::vector<int> suffix;
      double dim = -1.0;
    };
    Choice pick;
    bool sampled_class = false;
    std::vector<int> flat;
    std::vector<Mat> mats;
    std::vector<long> cell;
    long lead = 0;
    if (lt.commutative) {
      // Every word of a class has the same transform; score classes without
      // enumerating them.
      for (const auto& c : count_candidates(p, k)) {
        double log_size = log_multinomial(k, c), log_rho = 0.0;
        for (size_t t = 0; t < m; ++t) {
          log_size += c[t] * std::log(static_cast<double>(lt.letters[t].size()));
          log_rho += c[t] * std::log(lt.ratio[t]);
        }
        if (log_size > log_cap) continue;
        OrthogonalTransform tc = OrthogonalTransform::identity(d);
        for (size_t t = 0; t < m; ++t) tc = tc * lt.transform[t].pow(c[t]);
        const auto suf = suffix(tc, 0.0);
        if (!suf) continue;
        const double dim = log_size / -(log_rho + suffix_log_ratio(*suf));
        if (dim > pick.dim) pick = {c, *suf, dim};
      }
      if (pick.dim < 0.0) continue;
      collect_class(lt, letter_mats, pick.counts, k, d, opt.word_budget, opt.seed + static_cast<std::uint64_t>(k), flat, mats);
      cell.assign(mats.size(), 0);
    } else {
      // Two passes over the same word stream: the first sizes every
      // (type counts, transform cell) pair, the second keeps the chosen one.
      struct Cells {
        TransformIndex leaders;
        std::vector<size_t> size;
      };
      std::map<std::vector<int>, Cells> by_counts;
      auto cell_of = [&](const std::vector<int>& w, const Mat& acc, bool grow) -> std::pair<Cells*, long> {
        std::vector<int> c(m, 0);
        for (int l : w) ++c[lt.type_of[static_cast<size_t>(l)]];
        auto it = by_counts.find(c);
        if (it == by_counts.end()) {
          if (!grow) return {nullptr, -1};
          it = by_counts.emplace(std::move(c), Cells{TransformIndex(cell_radius), {}}).first;
        }
        const OrthogonalTransform t(acc);
        long hit = it->second.leaders.find_within(t, cell_radius);
        if (hit < 0 && grow) {
          hit = static_cast<long>(it->second.leaders.size());
          it->second.leaders.insert(t);
          it->second.size.push_back(0);
        }
        return {&it->second, hit};
      };
      const std::uint64_t seed = opt.seed + static_cast<std::uint64_t>(k);
      sampled_class = for_each_word(letter_mats, p_letter, k, d, opt.word_budget, seed,
                                    [&](const std::vector<int>& w, const Mat& acc) {
                                      auto [cells, hit] = cell_of(w, acc, true);
                                      ++cells->size[static_cast<size_t>(hit)];
                                    });
      struct Scored {
        const std::vector<int>* counts;
        const Cells* cells;
        size_t id;
        double log_rho, bound;
      };
      std::vector<Scored> scored;
      for (const auto& [c, cells] : by_counts) {
        double log_rho = 0.0;
        for (size_t t = 0; t < m; ++t) log_rho += c[t] * std::log(lt.ratio[t]);
        for (size_t id = 0; id < cells.size.size(); ++id) {
          const double n = static_cast<double>(cells.size[id]);
          scored.push_back({&c, &cells, id, log_rho, n > 1.0 ? std::log(n) / -log_rho : 0.0});
        }
      }
      std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) { return a.bound > b.bound; });
      // A suffix only lowers the dimension, so the bound prunes the search.
      const Scored* chosen = nullptr;
      int tried = 0;
      for (const auto& sc : scored) {
        if (sc.bound <= pick.dim || ++tried > 64) break;
        const auto suf = suffix(sc.cells->leaders.items()[sc.id], cell_radius);
        if (!suf) continue;
        const double n = static_cast<double>(sc.cells->size[sc.id]);
        const double dim = n > 1.0 ? std::log(n) / -(sc.log_rho + suffix_log_ratio(*suf)) : 0.0;
        if (dim > pick.dim) {
          pick = {*sc.counts, *suf, dim};
          chosen = &sc;
        }
      }
      if (!chosen) continue;
      const std::vector<int> want = *chosen->counts;
      const size_t want_id = chosen->id;
      by_counts.clear();
      for_each_word(letter_mats, p_letter, k, d, opt.word_budget, seed, [&](const std::vector<int>& w, const Mat& acc) {
        auto [cells, hit] = cell_of(w, acc, true);
        ++cells->size[static_cast<size_t>(hit)];
        if (static_cast<size_t>(hit) != want_id) return;
        std::vector<int> c(m, 0);
        for (int l : w) ++c[lt.type_of[static_cast<size_t>(l)]];
        if (c != want) return;
        flat.insert(flat.end(), w.begin(), w.end());
      });
      cell.assign(flat.size() / static_cast<size_t>(k), 0);
      if (pick.dim < 0.0) continue;
    }
    if (pick.dim > best.dimension) {
      best.k = k;
      best.sampled = sampled_class;
      best.dimension = pick.dim;
      best.system = assemble(k, flat, cell, lead, pick.suffix);
    }
    if (best.dimension > dim_target) {
      best.reached = true;
      break;
    }
    if (sampled_class && pick.dim < previous) break;
    previous = pick.dim;
  }
  return best;
}

// Sets every ratio to the first one after checking they agree to 1e-12.
inline void snap_ratios(SsIfs& sys) {
  const double r0 = sys.maps.front().ratio();
  for (auto& mp : sys.maps) {
    if (!same_ratio(mp.ratio(), r0)) throw InternalError("class words do not share one ratio");
    mp = mp.with_ratio(r0);
  }
}

inline void snap_rotations(SsIfs& sys, const OrthogonalTransform& to, double radius) {
  for (auto& mp : sys.maps) {
    if (operator_distance(mp.rotation(), to) >= radius) throw InternalError("output transform outside the snap radius");
    mp = mp.with_rotation(to);
  }
}

inline void finish_class_certificate(const SystemContext& ctx, Extraction& out, const ClassStep& step, double eps,
                                     const ExtractionOptions& opt) {
  auto& cert = out.certificate;
  cert.class_length = step.k;
  cert.group.sampled = step.sampled;
  cert.uniform_ratio = out.system.maps.front().ratio();
  cert.separation = require_ssc(ctx, out.system, opt.max_depth);
  cert.achieved = similarity_dimension(out.system.ratios());
  cert.partial = !step.reached || cert.achieved.value <= ctx.reference.value - eps;
  if (cert.group.target) {
    double worst = 0.0;
    for (const auto& mp : out.system.maps) worst = std::max(worst, operator_distance(mp.rotation(), *cert.group.target));
    cert.group.target_distance = worst;
  }
}

inline std::vector<OrthogonalTransform> vertex_generators(const GdIfs& g, VertexId j) {
  return generator_cycles(g, j).transforms;
}

}  // namespace detail

/// Single-ratio SS-IFS whose transforms are all within eps of `target`.
inline Extraction extract_uniform(const SystemContext& ctx, VertexId j, double eps, const OrthogonalTransform& target,
                                  const ExtractionOptions& opt = {}) {
  detail::check_epsilon(ctx, j, eps);
  const int d = ctx.graph->ambient_dim();
  if (target.dim() != d) throw InputError("target rotation has the wrong dimension");
  const EpsilonNet net = group_closure(detail::vertex_generators(*ctx.graph, j), d, eps, opt.group_budget);
  if (net.distance_to(target) > 0.5 * eps)
    throw PreconditionError("target is not in the closure of the transformation group at vertex " + std::to_string(j));
  Extraction base = extract_dense_group(ctx, j, 0.5 * eps, opt);
  // Cell radius plus corrector tolerance stays below eps.
  auto corrector = [&](const OrthogonalTransform& rep, double slack) {
    const double tol = eps - slack - 1e-12;
    return detail::word_search(base.system, d, 0.25 * tol, opt.corrector_length, 4 * opt.group_budget,
                               [&](const OrthogonalTransform& t) { return operator_distance(rep * t, target) < tol; });
  };
  const auto step = detail::class_step(*ctx.graph, base.system, 0.25 * eps, corrector, ctx.reference.value - eps, opt);
  if (step.system.size() == 0) throw InternalError("no corrector word found within the length cap");
  Extraction out;
  out.system = step.system;
  auto& cert = out.certificate;
  cert.vertex = j;
  cert.epsilon = eps;
  cert.reference = ctx.reference;
  cert.power_floor = base.certificate.power_floor;
  cert.powers = base.certificate.powers;
  cert.covering = base.certificate.covering;
  cert.group.heuristic = base.certificate.group.heuristic;
  cert.group.mode = GroupMode::epsilon_close;
  cert.group.target = target;
  detail::snap_ratios(out.system);
  detail::fill_group_report(cert.group, *ctx.graph, j, out.system, eps, opt);
  detail::finish_class_certificate(ctx, out, step, eps, opt);
  return out;
}

/// Single-ratio SS-IFS whose transforms all equal `target`, for finite groups.
inline Extraction extract_exact_finite(const SystemContext& ctx, VertexId j, double eps,
                                       const OrthogonalTransform& target, const ExtractionOptions& opt = {}) {
  detail::check_epsilon(ctx, j, eps);
  const int d = ctx.graph->ambient_dim();
  if (target.dim() != d) throw InputError("target rotation has the wrong dimension");
  const EpsilonNet net = group_closure(detail::vertex_generators(*ctx.graph, j), d, eps, opt.group_budget);
  if (!net.finite_group) throw PreconditionError("transformation group at vertex " + std::to_string(j) + " is not finite");
  if (net.distance_to(target) > 1e-8) throw PreconditionError("target is not an element of the transformation group");
  const double gap = net.min_separation();
  const double snap = std::isfinite(gap) ? 0.5 * gap : 1.0;
  Extraction base = extract_dense_group(ctx, j, 0.5 * eps, opt);
  auto corrector = [&](const OrthogonalTransform& rep, double slack) {
    return detail::word_search(base.system, d, 1e-9, opt.corrector_length, 4 * opt.group_budget,
                               [&](const OrthogonalTransform& t) { return operator_distance(rep * t, target) < snap - slack; });
  };
  const auto step = detail::class_step(*ctx.graph, base.system, 1e-9, corrector, ctx.reference.value - eps, opt);
  if (step.system.size() == 0) throw InternalError("no corrector word found within the length cap");
  Extraction out;
  out.system = step.system;
  auto& cert = out.certificate;
  cert.vertex = j;
  cert.epsilon = eps;
  cert.reference = ctx.reference;
  cert.power_floor = base.certificate.power_floor;
  cert.powers = base.certificate.powers;
  cert.covering = base.certificate.covering;
  cert.group.mode = GroupMode::exact;
  cert.group.target = target;
  cert.group.snap_radius = snap;
  detail::snap_ratios(out.system);
  detail::snap_rotations(out.system, target, snap);
  detail::fill_group_report(cert.group, *ctx.graph, j, out.system, eps, opt);
  detail::finish_class_certificate(ctx, out, step, eps, opt);
  return out;
}

struct AbsorptionInfo {
  int level = 0;        // word length used
  int bound_level = 0;  // smallest k with (sum r_i^(s-eps))^k > r_1^-(s-eps)
};

/// Planar SS-IFS with one common rotation O and one ratio; O has infinite
/// order unless the group is finite.
inline Extraction extract_planar(const SystemContext& ctx, VertexId j, double eps, const ExtractionOptions& opt = {},
                                 AbsorptionInfo* info = nullptr) {
  detail::check_epsilon(ctx, j, eps);
  const GdIfs& g = *ctx.graph;
  if (g.ambient_dim() != 2) throw InputError("planar extraction needs ambient dimension 2");
  const EpsilonNet net = group_closure(detail::vertex_generators(g, j), 2, eps, opt.group_budget);
  if (net.finite_group) {
    // Generator of the rotation subgroup: smallest positive angle.
    OrthogonalTransform o = OrthogonalTransform::identity(2);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : net.elements) {
      if (!e.preserves_orientation()) continue;
      double a = e.planar_angle();
      if (a < 0) a += 2.0 * std::numbers::pi;
      if (a > 1e-9 && a < best) {
        best = a;
        o = e;
      }
    }
    Extraction out = extract_exact_finite(ctx, j, eps, o, opt);
    out.certificate.group.mode = GroupMode::planar_so2;
    return out;
  }

  Extraction base = extract_dense_group(ctx, j, 0.25 * eps, opt);
  const double s = base.certificate.achieved.value;
  AbsorptionInfo absorb;
  auto reflecting = std::find_if(base.system.maps.begin(), base.system.maps.end(),
                                 [](const Similarity& mp) { return !mp.rotation().preserves_orientation(); });
  std::optional<int> r1;
  if (reflecting != base.system.maps.end()) {
    r1 = static_cast<int>(reflecting - base.system.maps.begin());
    const double t = std::max(s - eps, 1e-9);
    double sum = 0.0;
    for (const auto& mp : base.system.maps) sum += std::pow(mp.ratio(), t);
    const double need = -t * std::log(base.system.maps[static_cast<size_t>(*r1)].ratio());
    absorb.bound_level = sum > 1.0 ? static_cast<int>(std::floor(need / std::log(sum))) + 1 : 0;
  }
  const SsIfs& letters = base.system;
  // Reversing cells absorb their reflection with one reflecting letter, then
  // every cell is pushed to infinite order if needed.
  auto fix = [&](const OrthogonalTransform& rep, double) -> std::optional<std::vector<int>> {
    std::vector<int> head;
    OrthogonalTransform t0 = rep;
    if (!rep.preserves_orientation()) {
      if (!r1) return std::nullopt;
      head.push_back(*r1);
      t0 = rep * letters.maps[static_cast<size_t>(*r1)].rotation();
    }
    if (!rotation_order(t0, opt.max_order).finite) return head;
    auto tail = detail::word_search(letters, 2, 1e-9, opt.corrector_length, 4 * opt.group_budget,
                                    [&](const OrthogonalTransform& t) {
                                      return t.preserves_orientation() && !rotation_order(t0 * t, opt.max_order).finite;
                                    });
    if (!tail) return std::nullopt;
    head.insert(head.end(), tail->begin(), tail->end());
    return head;
  };
  const auto step = detail::class_step(g, letters, 1e-9, fix, ctx.reference.value - eps, opt);
  if (step.system.size() == 0) throw InternalError("no class admitted a rotation of infinite order");
  absorb.level = r1 ? step.k : 0;
  if (info) *info = absorb;
  Extraction out;
  out.system = step.system;
  auto& cert = out.certificate;
  cert.vertex = j;
  cert.epsilon = eps;
  cert.reference = ctx.reference;
  cert.power_floor = base.certificate.power_floor;
  cert.powers = base.certificate.powers;
  cert.covering = base.certificate.covering;
  cert.group.mode = GroupMode::planar_so2;
  const OrthogonalTransform o = out.system.maps.front().rotation();
  cert.group.target = o;
  cert.group.snap_radius = 1e-8;
  detail::snap_ratios(out.system);
  detail::snap_rotations(out.system, o, 1e-8);
  detail::fill_group_report(cert.group, g, j, out.system, eps, opt);
  detail::finish_class_certificate(ctx, out, step, eps, opt);
  return out;
}

}  // namespace gdifs
