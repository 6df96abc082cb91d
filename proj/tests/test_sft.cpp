#include <gtest/gtest.h>

#include "support.hpp"

using namespace gdifs;
using namespace testing_support;

namespace {

std::vector<Similarity> thirds(int n) {
  std::vector<Similarity> maps;
  for (int i = 0; i < n; ++i) maps.push_back(line_map(1.0 / 3.0, 2.0 * i / 3.0));
  return maps;
}

}  // namespace

TEST(Irreducible, Examples) {
  EXPECT_FALSE(is_irreducible({{1, 0}, {0, 1}}));
  EXPECT_TRUE(is_irreducible({{1, 1}, {1, 1}}));
  EXPECT_TRUE(is_irreducible({{0, 1, 0}, {0, 0, 1}, {1, 0, 0}}));
  EXPECT_FALSE(is_irreducible({{1, 1}, {0, 1}}));
  EXPECT_FALSE(is_irreducible({{0}}));
  EXPECT_THROW(is_irreducible({{1, 2}, {1, 1}}), InputError);
  EXPECT_THROW(is_irreducible({{1, 1}}), InputError);
}

TEST(SftSystem, RejectsDeadSymbolsAndMismatchedMaps) {
  EXPECT_THROW(SftSystem({{1, 1}, {0, 0}}, thirds(2)), InputError);
  EXPECT_THROW(SftSystem({{1, 1}, {1, 1}}, thirds(3)), InputError);
}

TEST(ToGdifs, FullShift) {
  const auto maps = thirds(2);
  const GdIfs g = to_gdifs(SftSystem({{1, 1}, {1, 1}}, maps));
  EXPECT_EQ(g.vertex_count(), 2);
  ASSERT_EQ(g.edge_count(), 4);
  for (const auto& e : g.edges())
    EXPECT_EQ(e.map.translation()(0), maps[static_cast<size_t>(e.source)].translation()(0));
}

TEST(ToGdifs, GoldenMean) {
  const GdIfs g = to_gdifs(SftSystem({{1, 1}, {1, 0}}, thirds(2)));
  EXPECT_EQ(g.edge_count(), 3);
  EXPECT_TRUE(strongly_connected(g));
}

TEST(ToGdifs, GoldenMeanDimension) {
  // A(s) = 3^{-s} [[1,1],[1,0]], so rho = phi 3^{-s} and s = log(phi)/log 3.
  const GdIfs g = to_gdifs(SftSystem({{1, 1}, {1, 0}}, thirds(2)));
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const double want = std::log(phi) / std::log(3.0);
  EXPECT_NEAR(mauldin_williams_dimension(g).value, want, 1e-9);
  for (VertexId j = 0; j < 2; ++j) EXPECT_NEAR(vertex_dimension(g, j).value, want, 1e-9);
}

TEST(ToGdifs, FullShiftHalvesHasDimensionOne) {
  std::vector<Similarity> maps{line_map(0.5, 0.0), line_map(0.5, 0.5)};
  EXPECT_NEAR(mauldin_williams_dimension(to_gdifs(SftSystem({{1, 1}, {1, 1}}, maps))).value, 1.0, 1e-9);
}

TEST(ToGdifs, CyclesAreAdmissibleWords) {
  std::mt19937_64 rng(71);
  const TransitionMatrix a{{0, 1, 1}, {1, 0, 1}, {1, 1, 0}};
  const GdIfs g = to_gdifs(SftSystem(a, thirds(3)));
  for (VertexId j = 0; j < 3; ++j) {
    int seen = 0;
    detail::for_each_cycle(g, j, 6, 100'000, [&](const EdgePath& c) {
      // Reading the source symbol of each edge gives the word; consecutive
      // symbols must be allowed, including the wrap-around.
      std::vector<int> word;
      for (EdgeId e : c.edges()) word.push_back(g.edge(e).source);
      for (size_t t = 0; t < word.size(); ++t) {
        const int x = word[t], y = word[(t + 1) % word.size()];
        EXPECT_EQ(a[static_cast<size_t>(x)][static_cast<size_t>(y)], 1);
      }
      EXPECT_EQ(word.front(), j);
      ++seen;
      return true;
    });
    EXPECT_GT(seen, 0);
  }
}

TEST(ToGdifs, IrreducibleIffStronglyConnected) {
  std::mt19937_64 rng(72);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t m = 2 + trial % 4;
    TransitionMatrix a(m, std::vector<int>(m, 0));
    for (auto& row : a) {
      for (auto& x : row) x = coin(rng) ? 1 : 0;
      row[std::uniform_int_distribution<size_t>(0, m - 1)(rng)] = 1;
    }
    const GdIfs g = to_gdifs(SftSystem(a, thirds(static_cast<int>(m))));
    EXPECT_EQ(is_irreducible(a), strongly_connected(g));
  }
}

TEST(Config, GoldenMeanFixture) {
  const SystemConfig cfg = load_config(fixture("golden_mean_sft"));
  EXPECT_EQ(cfg.kind, "sft");
  ASSERT_TRUE(cfg.sft);
  EXPECT_EQ(cfg.graph.edge_count(), 3);
}
