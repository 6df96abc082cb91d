#pragma once

// Ball enclosures of attractor pieces and certified disjointness of cylinders.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "gdifs/graph.hpp"
#include "gdifs/parallel.hpp"

namespace gdifs {

struct Ball {
  Vec center;
  double radius = 0.0;
};

/// One ball per vertex with S_e(B_l) inside B_i for every edge e: i -> l.
struct Enclosure {
  std::vector<Ball> balls;

  const Ball& at(VertexId v) const { return balls.at(static_cast<size_t>(v)); }

  /// Largest violation of r_e R_l + |S_e(c_l) - c_i| <= R_i over all edges.
  double invariance_violation(const GdIfs& g) const {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& e : g.edges()) {
      const Ball& src = at(e.source);
      const Ball& dst = at(e.target);
      const double lhs = e.map.ratio() * dst.radius + (e.map.apply(dst.center) - src.center).norm();
      worst = std::max(worst, lhs - src.radius);
    }
    return worst;
  }
};

inline bool ball_invariant_under(const Ball& b, std::span<const Similarity> maps, double tol = 1e-12) {
  for (const auto& m : maps)
    if (m.ratio() * b.radius + (m.apply(b.center) - b.center).norm() > b.radius + tol) return false;
  return true;
}

inline Enclosure compute_enclosure(const GdIfs& g) {
  const int q = g.vertex_count();
  const int d = g.ambient_dim();
  const double rmax = g.max_ratio();
  double vmax = 0.0;
  for (const auto& e : g.edges()) vmax = std::max(vmax, e.map.translation().norm());
  const double r0 = vmax / (1.0 - rmax);

  Enclosure enc;
  enc.balls.assign(static_cast<size_t>(q), Ball{Vec::Zero(d), r0});

  // Ball map: each vertex ball becomes the bounding-box-centred ball around
  // the images of its successors' balls.
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<Ball> next(static_cast<size_t>(q));
    double change = 0.0;
    for (VertexId i = 0; i < q; ++i) {
      Vec lo = Vec::Constant(d, std::numeric_limits<double>::infinity());
      Vec hi = -lo;
      std::vector<Ball> images;
      for (EdgeId id : g.outgoing(i)) {
        const Edge& e = g.edge(id);
        Ball img{e.map.apply(enc.at(e.target).center), e.map.ratio() * enc.at(e.target).radius};
        lo = lo.cwiseMin((img.center.array() - img.radius).matrix());
        hi = hi.cwiseMax((img.center.array() + img.radius).matrix());
        images.push_back(std::move(img));
      }
      Ball b{0.5 * (lo + hi), 0.0};
      for (const auto& img : images) b.radius = std::max(b.radius, (img.center - b.center).norm() + img.radius);
      const double old = enc.at(i).radius;
      change = std::max(change, std::abs(old - b.radius) / std::max(old, 1e-300));
      next[static_cast<size_t>(i)] = std::move(b);
    }
    enc.balls = std::move(next);
    if (change < 1e-9) break;
  }

  // With centres fixed, iterate R_i <- max_e (r_e R_l + |S_e(c_l) - c_i|), a
  // sup-norm contraction, then lift by the residual so invariance is exact.
  std::vector<double> offset(static_cast<size_t>(g.edge_count()));
  for (EdgeId id = 0; id < g.edge_count(); ++id) {
    const Edge& e = g.edge(id);
    offset[static_cast<size_t>(id)] = (e.map.apply(enc.at(e.target).center) - enc.at(e.source).center).norm();
  }
  auto apply_t = [&](const std::vector<double>& r) {
    std::vector<double> out(static_cast<size_t>(q), 0.0);
    for (EdgeId id = 0; id < g.edge_count(); ++id) {
      const Edge& e = g.edge(id);
      out[e.source] = std::max(out[e.source], e.map.ratio() * r[e.target] + offset[id]);
    }
    return out;
  };
  std::vector<double> radii(static_cast<size_t>(q));
  for (VertexId i = 0; i < q; ++i) radii[i] = enc.at(i).radius;
  for (int iter = 0; iter < 10000; ++iter) {
    auto next = apply_t(radii);
    double change = 0.0;
    for (VertexId i = 0; i < q; ++i) change = std::max(change, std::abs(next[i] - radii[i]));
    radii = std::move(next);
    if (change <= 1e-16 * (1.0 + *std::max_element(radii.begin(), radii.end()))) break;
  }
  const auto image = apply_t(radii);
  double eta = 0.0;
  for (VertexId i = 0; i < q; ++i) eta = std::max(eta, image[i] - radii[i]);
  const double lift = eta / (1.0 - rmax);
  for (VertexId i = 0; i < q; ++i) {
    radii[i] += lift;
    radii[i] += 4.0 * std::numeric_limits<double>::epsilon() * (radii[i] + 1.0);
    enc.balls[static_cast<size_t>(i)].radius = radii[i];
  }
  return enc;
}

struct DiameterBounds {
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Bounds on diam(K_i) from the images of the enclosure balls along all paths
/// of length `refine_depth` (reduced if that would exceed 4096 paths).
inline DiameterBounds diameter_bounds(const GdIfs& g, const Enclosure& enc, int refine_depth) {
  if (refine_depth < 0) throw InputError("diameter_bounds: depth must be >= 0");
  DiameterBounds out;
  for (VertexId i = 0; i < g.vertex_count(); ++i) {
    struct Piece {
      Similarity map;
      VertexId target;
    };
    std::vector<Piece> level{{Similarity::scaling(0.5, Vec::Zero(g.ambient_dim())), i}};
    bool identity_level = true;
    for (int depth = 0; depth < refine_depth; ++depth) {
      size_t count = 0;
      for (const auto& p : level) count += g.outgoing(p.target).size();
      if (count > 4096) break;
      std::vector<Piece> next;
      next.reserve(count);
      for (const auto& p : level)
        for (EdgeId id : g.outgoing(p.target)) {
          const Edge& e = g.edge(id);
          next.push_back({identity_level ? e.map : compose(p.map, e.map), e.target});
        }
      level = std::move(next);
      identity_level = false;
    }
    std::vector<Vec> pts;
    std::vector<double> rad;
    for (const auto& p : level) {
      const Ball& b = enc.at(p.target);
      if (identity_level) {
        pts.push_back(b.center);
        rad.push_back(b.radius);
      } else {
        pts.push_back(p.map.apply(b.center));
        rad.push_back(p.map.ratio() * b.radius);
      }
    }
    double lo = 0.0, hi = 0.0;
    for (size_t a = 0; a < pts.size(); ++a)
      for (size_t b = a; b < pts.size(); ++b) {
        const double dist = (pts[a] - pts[b]).norm();
        lo = std::max(lo, dist - rad[a] - rad[b]);
        hi = std::max(hi, dist + rad[a] + rad[b]);
      }
    hi = std::min(hi, 2.0 * enc.at(i).radius);
    out.lower.push_back(std::min(lo, hi));
    out.upper.push_back(hi);
  }
  return out;
}

enum class Verdict { disjoint, overlapping, unknown };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::disjoint: return "disjoint";
    case Verdict::overlapping: return "overlapping";
    case Verdict::unknown: return "unknown";
  }
  return "?";
}

struct DisjointnessResult {
  Verdict verdict = Verdict::unknown;
  double gap = 0.0;    // certified lower bound on the set distance when disjoint
  int depth_used = 0;  // deepest refinement level visited
};

namespace detail {

inline bool same_map(const Similarity& a, const Similarity& b, double tol) {
  return std::abs(a.ratio() - b.ratio()) <= tol && operator_distance(a.rotation(), b.rotation()) <= tol &&
         (a.translation() - b.translation()).norm() <= tol;
}

inline bool is_prefix(const std::vector<EdgeId>& a, const std::vector<EdgeId>& b) {
  return a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin());
}

}  // namespace detail

/// Semi-decision for K_p and K_q being disjoint: compare the enclosure ball
/// images and refine the larger cylinder by one edge level when they meet.
inline DisjointnessResult cylinders_disjoint(const GdIfs& g, const EdgePath& p, const EdgePath& q, const Enclosure& enc,
                                             int max_depth, size_t work_limit = 200000) {
  if (p.source() != q.source()) throw InputError("cylinders_disjoint: paths must share their source vertex");
  if (detail::is_prefix(p.edges(), q.edges()) || detail::is_prefix(q.edges(), p.edges()))
    return {Verdict::overlapping, 0.0, 0};

  struct Cyl {
    Similarity map;
    VertexId target;
    int depth;
  };
  struct Job {
    Cyl a, b;
  };
  std::vector<Job> stack{{{p.composite(), p.target(), 0}, {q.composite(), q.target(), 0}}};
  DisjointnessResult res{Verdict::disjoint, std::numeric_limits<double>::infinity(), 0};
  size_t work = 0;
  auto radius = [&](const Cyl& c) { return c.map.ratio() * enc.at(c.target).radius; };
  while (!stack.empty()) {
    Job job = std::move(stack.back());
    stack.pop_back();
    if (++work > work_limit) return {Verdict::unknown, 0.0, res.depth_used};
    res.depth_used = std::max({res.depth_used, job.a.depth, job.b.depth});
    const double ra = radius(job.a), rb = radius(job.b);
    const double dist = (job.a.map.apply(enc.at(job.a.target).center) - job.b.map.apply(enc.at(job.b.target).center)).norm();
    const double gap = dist - ra - rb;
    if (gap > 0.0) {
      res.gap = std::min(res.gap, gap);
      continue;
    }
    if (job.a.target == job.b.target && detail::same_map(job.a.map, job.b.map, 1e-12))
      return {Verdict::overlapping, 0.0, res.depth_used};
    const bool can_a = job.a.depth < max_depth, can_b = job.b.depth < max_depth;
    if (!can_a && !can_b) {
      res.verdict = Verdict::unknown;
      continue;
    }
    const bool split_a = can_a && (!can_b || ra >= rb);
    const Cyl& parent = split_a ? job.a : job.b;
    for (EdgeId id : g.outgoing(parent.target)) {
      const Edge& e = g.edge(id);
      Cyl child{compose(parent.map, e.map), e.target, parent.depth + 1};
      stack.push_back(split_a ? Job{child, job.b} : Job{job.a, child});
    }
  }
  if (res.verdict != Verdict::disjoint) return {Verdict::unknown, 0.0, res.depth_used};
  return res;
}

struct PairGap {
  int a = 0;
  int b = 0;
  double gap = 0.0;
};

/// Evidence that the first-level images of an SS-IFS attractor are pairwise
/// disjoint. `ball` is an invariant ball for all maps. Pairs whose image balls
/// are separated along the first coordinate by more than `cutoff` are not
/// listed; their gap exceeds `cutoff`.
struct SeparationCertificate {
  Ball ball;
  double min_gap = 0.0;
  double cutoff = 0.0;
  int refinement_depth = 0;
  std::vector<PairGap> pairs;
};

struct SeparationFailure {
  int a = 0;
  int b = 0;
  Verdict verdict = Verdict::unknown;
};

struct SscResult {
  std::optional<SeparationCertificate> certificate;
  std::optional<SeparationFailure> failure;

  bool ok() const { return certificate.has_value(); }
};

namespace detail {

struct SweepOutcome {
  std::vector<PairGap> nearest;   // best scanned pair per map (a < b)
  std::vector<PairGap> refined;   // pairs that needed refinement
  double min_gap = std::numeric_limits<double>::infinity();
  int depth = 0;
  std::optional<SeparationFailure> failure;
};

// True if some pair of image balls meets; only then is refinement needed.
inline bool any_ball_overlap(const std::vector<Vec>& centers, const std::vector<double>& radii,
                             const std::vector<size_t>& order, double rmax) {
  for (size_t s = 0; s < order.size(); ++s) {
    const size_t i = order[s];
    for (size_t t = s + 1; t < order.size(); ++t) {
      const size_t l = order[t];
      if (centers[l](0) - centers[i](0) > radii[i] + rmax) break;
      if ((centers[i] - centers[l]).norm() - radii[i] - radii[l] <= 0.0) return true;
    }
  }
  return false;
}

// Examines every pair whose image balls are within `cutoff` of each other
// along the first coordinate, plus sweep-order neighbours; all other pairs
// have ball gap > cutoff.
// `refine(a, b)` decides pairs whose balls meet.
template <class Refine>
SweepOutcome sweep_pairs(std::span<const Similarity> maps, const Ball& ball, double cutoff, Refine&& refine) {
  const size_t n = maps.size();
  std::vector<Vec> centers(n);
  std::vector<double> radii(n);
  double rmax = 0.0;
  for (size_t i = 0; i < n; ++i) {
    centers[i] = maps[i].apply(ball.center);
    radii[i] = maps[i].ratio() * ball.radius;
    rmax = std::max(rmax, radii[i]);
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return centers[a](0) < centers[b](0); });

  struct Local {
    PairGap best{-1, -1, std::numeric_limits<double>::infinity()};
    std::vector<PairGap> refined;
    int depth = 0;
    std::optional<SeparationFailure> failure;
  };
  std::vector<Local> local(n);
  parallel_for(n, [&](size_t s) {
    const size_t i = order[s];
    Local& out = local[s];
    for (size_t t = s + 1; t < n; ++t) {
      const size_t l = order[t];
      // The next map in sweep order is always examined so that every map
      // reports a neighbour, even when all gaps exceed the cutoff.
      if (t > s + 1 && centers[l](0) - centers[i](0) > radii[i] + rmax + cutoff) break;
      double gap = (centers[i] - centers[l]).norm() - radii[i] - radii[l];
      const int a = static_cast<int>(std::min(i, l)), b = static_cast<int>(std::max(i, l));
      if (gap <= 0.0) {
        const DisjointnessResult r = refine(a, b);
        if (r.verdict != Verdict::disjoint) {
          out.failure = SeparationFailure{a, b, r.verdict};
          return;
        }
        gap = r.gap;
        out.depth = std::max(out.depth, r.depth_used);
        out.refined.push_back({a, b, gap});
      }
      if (gap < out.best.gap) out.best = {a, b, gap};
    }
  });

  SweepOutcome res;
  for (size_t s = 0; s < n; ++s) {
    Local& l = local[s];
    if (l.failure && !res.failure) res.failure = l.failure;
    if (l.best.a >= 0) {
      res.nearest.push_back(l.best);
      res.min_gap = std::min(res.min_gap, l.best.gap);
    }
    res.refined.insert(res.refined.end(), l.refined.begin(), l.refined.end());
    res.depth = std::max(res.depth, l.depth);
  }
  return res;
}

inline double image_radius_cutoff(std::span<const Similarity> maps, const Ball& ball) {
  double rmax = 0.0;
  for (const auto& m : maps) rmax = std::max(rmax, m.ratio() * ball.radius);
  return 2.0 * rmax;
}

inline SeparationCertificate assemble_certificate(const Ball& ball, double cutoff, size_t n, SweepOutcome&& sweep) {
  SeparationCertificate cert;
  cert.ball = ball;
  cert.cutoff = cutoff;
  cert.refinement_depth = sweep.depth;
  cert.min_gap = n > 1 ? std::min(sweep.min_gap, cutoff) : 0.0;
  // Nearest-neighbour pairs plus every refined pair, deduplicated.
  std::vector<PairGap> all = std::move(sweep.nearest);
  all.insert(all.end(), sweep.refined.begin(), sweep.refined.end());
  std::sort(all.begin(), all.end(), [](const PairGap& x, const PairGap& y) {
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  all.erase(std::unique(all.begin(), all.end(), [](const PairGap& x, const PairGap& y) { return x.a == y.a && x.b == y.b; }),
            all.end());
  cert.pairs = std::move(all);
  return cert;
}

}  // namespace detail

/// Strong separation check for an SS-IFS. If `hint` is an invariant ball for
/// every map it is used as the enclosure; otherwise one is computed.
inline SscResult verify_ssc(std::span<const Similarity> maps, int max_depth, const std::optional<Ball>& hint = std::nullopt) {
  if (maps.empty()) throw InputError("verify_ssc: empty system");
  Ball ball;
  if (hint && ball_invariant_under(*hint, maps)) {
    ball = *hint;
  } else {
    ball = compute_enclosure(GdIfs::from_maps(maps)).at(0);
  }
  const double cutoff = detail::image_radius_cutoff(maps, ball);

  std::vector<Vec> centers;
  std::vector<double> radii;
  double rmax = 0.0;
  for (const auto& m : maps) {
    centers.push_back(m.apply(ball.center));
    radii.push_back(m.ratio() * ball.radius);
    rmax = std::max(rmax, radii.back());
  }
  std::vector<size_t> order(maps.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return centers[a](0) < centers[b](0); });
  // The one-vertex graph is only needed when some image balls meet; build it
  // before the parallel sweep so workers only read it.
  std::optional<GdIfs> graph;
  const Enclosure enc{{ball}};
  if (detail::any_ball_overlap(centers, radii, order, rmax)) graph.emplace(GdIfs::from_maps(maps));
  auto refine = [&](int a, int b) {
    return cylinders_disjoint(*graph, EdgePath::from_edges(*graph, {a}), EdgePath::from_edges(*graph, {b}), enc, max_depth);
  };
  auto sweep = detail::sweep_pairs(maps, ball, cutoff, refine);
  if (sweep.failure) return {std::nullopt, sweep.failure};
  return {detail::assemble_certificate(ball, cutoff, maps.size(), std::move(sweep)), std::nullopt};
}

/// Separation check for a system whose maps are composites of cycles at one
/// vertex j of `g`. Image balls are taken around the enclosure ball of j and
/// meeting pairs are refined along the graph: disjoint cylinders K_p, K_q
/// contain the corresponding first-level pieces of the subsystem attractor.
inline SscResult verify_ssc(const GdIfs& g, const Enclosure& enc, std::span<const EdgePath> paths, int max_depth) {
  if (paths.empty()) throw InputError("verify_ssc: empty system");
  const VertexId j = paths.front().source();
  std::vector<Similarity> maps;
  maps.reserve(paths.size());
  for (const auto& p : paths) {
    if (!p.is_cycle() || p.source() != j) throw InputError("verify_ssc: provenance paths must be cycles at one vertex");
    maps.push_back(p.composite());
  }
  const Ball& ball = enc.at(j);
  const double cutoff = detail::image_radius_cutoff(maps, ball);
  auto refine = [&](int a, int b) {
    return cylinders_disjoint(g, paths[static_cast<size_t>(a)], paths[static_cast<size_t>(b)], enc, max_depth);
  };
  auto sweep = detail::sweep_pairs(maps, ball, cutoff, refine);
  if (sweep.failure) return {std::nullopt, sweep.failure};
  return {detail::assemble_certificate(ball, cutoff, maps.size(), std::move(sweep)), std::nullopt};
}

}  // namespace gdifs
