#include <gtest/gtest.h>

#include "support.hpp"

using namespace gdifs;
using namespace testing_support;

namespace {

std::vector<Similarity> sierpinski(double r) {
  const double h = std::sqrt(3.0) / 2.0;
  return {plane_map(r, 0, 0, 0), plane_map(r, 0, 1 - r, 0), plane_map(r, 0, (1 - r) / 2, (1 - r) * h)};
}

// Minimum distance between the two first-level pieces a and b of the
// attractor, estimated from chaos-game samples.
double sampled_piece_distance(const std::vector<Similarity>& maps, int a, int b, long n) {
  const auto cloud = chaos_game(GdIfs::from_maps(maps), n, 99);
  std::vector<Vec> pa, pb;
  for (const auto& p : cloud) {
    pa.push_back(maps[static_cast<size_t>(a)].apply(p.x));
    pb.push_back(maps[static_cast<size_t>(b)].apply(p.x));
  }
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < pa.size(); i += 7)
    for (const auto& y : pb) best = std::min(best, (pa[i] - y).norm());
  return best;
}

}  // namespace

TEST(Enclosure, CantorInterval) {
  const GdIfs g = cantor();
  const Enclosure enc = compute_enclosure(g);
  EXPECT_NEAR(enc.at(0).center(0), 0.5, 1e-6);
  EXPECT_LE(enc.at(0).radius, 0.5 + 1e-6);
  EXPECT_GE(enc.at(0).radius, 0.5);
  EXPECT_LE(enc.invariance_violation(g), 0.0);
}

TEST(Enclosure, SinglePointAttractor) {
  const std::vector<Similarity> maps{line_map(0.5, 0.0)};
  const Enclosure enc = compute_enclosure(GdIfs::from_maps(maps));
  EXPECT_LE(enc.at(0).radius, 1e-9);
  EXPECT_NEAR(enc.at(0).center(0), 0.0, 1e-9);
}

TEST(Enclosure, InvariantOnRandomSystems) {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 30; ++trial) {
    const GdIfs g = random_graph(rng, 2, 2, 1 + trial % 3);
    const Enclosure enc = compute_enclosure(g);
    // Direct inequality r_e R_l + |S_e(c_l) - c_i| <= R_i per edge.
    for (const auto& e : g.edges()) {
      const Ball& src = enc.at(e.source);
      const Ball& dst = enc.at(e.target);
      EXPECT_LE(e.map.ratio() * dst.radius + (e.map.apply(dst.center) - src.center).norm(), src.radius * (1 + 1e-12));
    }
  }
}

TEST(DiameterBounds, Cantor) {
  const GdIfs g = cantor();
  const DiameterBounds b = diameter_bounds(g, compute_enclosure(g), 8);
  EXPECT_GE(b.lower[0], 0.999);
  EXPECT_LE(b.upper[0], 1.001);
}

TEST(DiameterBounds, SingleMap) {
  const std::vector<Similarity> maps{line_map(0.5, 1.0)};
  const GdIfs g = GdIfs::from_maps(maps);
  const DiameterBounds b = diameter_bounds(g, compute_enclosure(g), 6);
  EXPECT_NEAR(b.lower[0], 0.0, 1e-9);
  EXPECT_NEAR(b.upper[0], 0.0, 1e-6);
}

TEST(DiameterBounds, BracketShrinksWithDepth) {
  std::mt19937_64 rng(62);
  for (int trial = 0; trial < 5; ++trial) {
    const GdIfs g = random_graph(rng, 3, 3, 2);
    const Enclosure enc = compute_enclosure(g);
    double prev_lo = -1.0, prev_hi = std::numeric_limits<double>::infinity();
    for (int depth = 0; depth <= 6; ++depth) {
      const DiameterBounds b = diameter_bounds(g, enc, depth);
      for (int v = 0; v < g.vertex_count(); ++v) EXPECT_LE(b.lower[v], b.upper[v] + 1e-12);
      EXPECT_GE(b.lower[0], prev_lo - 1e-12);
      EXPECT_LE(b.upper[0], prev_hi + 1e-12);
      prev_lo = b.lower[0];
      prev_hi = b.upper[0];
    }
  }
}

TEST(CylindersDisjoint, CantorFirstLevel) {
  const GdIfs g = cantor();
  const Enclosure enc = compute_enclosure(g);
  const auto r = cylinders_disjoint(g, EdgePath::from_edges(g, {0}), EdgePath::from_edges(g, {1}), enc, 8);
  EXPECT_EQ(r.verdict, Verdict::disjoint);
  EXPECT_GE(r.gap, 1.0 / 3.0 - 1e-6);
  EXPECT_LE(r.gap, 1.0 / 3.0 + 1e-9);
}

TEST(CylindersDisjoint, EqualAndNestedOverlap) {
  const GdIfs g = cantor();
  const Enclosure enc = compute_enclosure(g);
  const auto p = EdgePath::from_edges(g, {0, 1});
  EXPECT_EQ(cylinders_disjoint(g, p, p, enc, 8).verdict, Verdict::overlapping);
  EXPECT_EQ(cylinders_disjoint(g, EdgePath::from_edges(g, {0}), p, enc, 8).verdict, Verdict::overlapping);
}

TEST(VerifySsc, CantorGap) {
  const std::vector<Similarity> maps{line_map(1.0 / 3.0, 0.0), line_map(1.0 / 3.0, 2.0 / 3.0)};
  const SscResult r = verify_ssc(maps, 8);
  ASSERT_TRUE(r.certificate);
  EXPECT_NEAR(r.certificate->min_gap, 1.0 / 3.0, 1e-6);
}

TEST(VerifySsc, IdenticalMapsFail) {
  const std::vector<Similarity> maps{line_map(0.3, 0.1), line_map(0.3, 0.1), line_map(0.3, 0.6)};
  const SscResult r = verify_ssc(maps, 8);
  EXPECT_FALSE(r.certificate);
  ASSERT_TRUE(r.failure);
  EXPECT_EQ(r.failure->verdict, Verdict::overlapping);
}

TEST(VerifySsc, DepthSensitivity) {
  // Enclosure images of the pieces meet, the pieces themselves are 0.04 apart.
  const auto maps = sierpinski(0.48);
  const SscResult shallow = verify_ssc(maps, 0);
  EXPECT_FALSE(shallow.certificate);
  ASSERT_TRUE(shallow.failure);
  EXPECT_EQ(shallow.failure->verdict, Verdict::unknown);
  const SscResult deep = verify_ssc(maps, 14);
  ASSERT_TRUE(deep.certificate);
  EXPECT_GT(deep.certificate->min_gap, 0.0);
  EXPECT_LE(deep.certificate->min_gap, 0.04 + 1e-9);
}

TEST(VerifySsc, TouchingPiecesNeverCertified) {
  const std::vector<Similarity> maps{line_map(0.5, 0.0), line_map(0.5, 0.5)};
  EXPECT_FALSE(verify_ssc(maps, 10).certificate);
}

TEST(VerifySsc, GapsAreSoundOnSamples) {
  const auto maps = sierpinski(0.45);
  const SscResult r = verify_ssc(maps, 12);
  ASSERT_TRUE(r.certificate);
  for (const auto& p : r.certificate->pairs)
    EXPECT_GE(sampled_piece_distance(maps, p.a, p.b, 3000), p.gap) << p.a << "," << p.b;
}

TEST(VerifySsc, ListsAllPairsWithinCutoffOrNearest) {
  const auto maps = sierpinski(0.3);
  const SscResult r = verify_ssc(maps, 8);
  ASSERT_TRUE(r.certificate);
  EXPECT_FALSE(r.certificate->pairs.empty());
  for (const auto& p : r.certificate->pairs) {
    EXPECT_LT(p.a, p.b);
    EXPECT_GE(p.gap, r.certificate->min_gap);
  }
  EXPECT_TRUE(ball_invariant_under(r.certificate->ball, maps));
}
