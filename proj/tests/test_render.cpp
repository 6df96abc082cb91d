#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "support.hpp"

using namespace gdifs;
using namespace testing_support;

TEST(ChaosGame, CantorPointsStayInTheCantorSet) {
  const auto cloud = chaos_game(cantor(), 20'000, 5);
  ASSERT_EQ(cloud.size(), 20'000u);
  for (const auto& p : cloud) {
    // Every point lies in a level-6 Cantor interval.
    double x = p.x(0);
    ASSERT_GE(x, -1e-12);
    ASSERT_LE(x, 1 + 1e-12);
    for (int level = 0; level < 6; ++level) {
      x *= 3.0;
      const double digit = std::floor(x + 1e-9);
      EXPECT_NE(digit, 1.0);
      x -= std::min(digit, 2.0);
    }
  }
}

TEST(Render, CantorLightsOnlyTheSegmentBand) {
  RenderSpec spec;
  spec.width = 300;
  spec.height = 100;
  const GdIfs g = cantor();
  const Image img = render(g, spec);
  const Frame f = Frame::fit(g, spec);
  const auto lo = *f.pixel(vec({0.0})), hi = *f.pixel(vec({1.0}));
  int lit = 0;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      if (!img.lit(c, r)) continue;
      ++lit;
      EXPECT_LE(std::abs(r - lo.second), 1);
      EXPECT_GE(c, lo.first - 1);
      EXPECT_LE(c, hi.first + 1);
    }
  EXPECT_GT(lit, 20);
  // The middle third is empty.
  const auto a = *f.pixel(vec({0.36})), b = *f.pixel(vec({0.64}));
  for (int c = a.first; c <= b.first; ++c) EXPECT_FALSE(img.lit(c, lo.second));
}

TEST(Render, DeterministicForFixedSeed) {
  const SystemConfig cfg = load_config(fixture("three_vertex_ssc"));
  RenderSpec spec;
  spec.width = spec.height = 128;
  spec.iterations = 20'000;
  EXPECT_EQ(encode_p6(render(cfg.graph, spec)), encode_p6(render(cfg.graph, spec)));
  RenderSpec other = spec;
  other.seed = 2;
  EXPECT_NE(encode_p6(render(cfg.graph, spec)), encode_p6(render(cfg.graph, other)));
}

TEST(Render, OverlayInsideBaseSupport) {
  const SystemConfig cfg = load_config(fixture("planar_irrational"));
  const auto ctx = SystemContext::make(cfg.graph);
  const Extraction ex = extract_dense_group(ctx, 0, 0.2);
  RenderSpec spec;
  spec.width = spec.height = 96;
  spec.iterations = 200'000;
  const Image base = render(cfg.graph, spec);
  const Image both = render(cfg.graph, spec, ex.system.maps);
  int white = 0;
  for (int r = 0; r < both.height; ++r)
    for (int c = 0; c < both.width; ++c) {
      const auto* p = both.at(c, r);
      if (!(p[0] == 255 && p[1] == 255 && p[2] == 255)) continue;
      ++white;
      bool near = false;
      for (int dr = -1; dr <= 1 && !near; ++dr)
        for (int dc = -1; dc <= 1 && !near; ++dc) {
          const int rr = r + dr, cc = c + dc;
          near = rr >= 0 && cc >= 0 && rr < base.height && cc < base.width && base.lit(cc, rr);
        }
      EXPECT_TRUE(near) << c << "," << r;
    }
  EXPECT_GT(white, 0);
}

TEST(Render, P6Header) {
  RenderSpec spec;
  spec.width = 7;
  spec.height = 5;
  spec.iterations = 1000;
  const std::string bytes = encode_p6(render(cantor(), spec));
  const std::string header = "P6\n7 5\n255\n";
  ASSERT_EQ(bytes.substr(0, header.size()), header);
  EXPECT_EQ(bytes.size(), header.size() + 7 * 5 * 3);
}

TEST(Render, RejectsTooFewIterations) {
  RenderSpec spec;
  spec.iterations = 10;
  EXPECT_THROW(render(cantor(), spec), InputError);
}

TEST(Render, AtomicWrite) {
  const auto path = (std::filesystem::temp_directory_path() / "gdifs_atomic_test.bin").string();
  write_file_atomic(path, "abc");
  std::ifstream in(path, std::ios::binary);
  std::string s((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(s, "abc");
  EXPECT_FALSE(std::filesystem::exists(path + ".tmp"));
  std::filesystem::remove(path);
}

TEST(SmallRational, Examples) {
  const auto half = small_rational(0.5);
  ASSERT_TRUE(half);
  EXPECT_EQ(half->p, 1);
  EXPECT_EQ(half->q, 2);
  const auto third = small_rational(std::log(8.0) / std::log(4.0));
  ASSERT_TRUE(third);
  EXPECT_EQ(third->p, 3);
  EXPECT_EQ(third->q, 2);
  EXPECT_FALSE(small_rational(std::log(2.0) / std::log(3.0)));
  EXPECT_FALSE(small_rational(std::numbers::pi));
}

TEST(LogRatio, IncommensurableRatiosAreFlagged) {
  const std::vector<Similarity> a{line_map(0.5, 0.0), line_map(0.5, 0.5)};
  const std::vector<Similarity> b{line_map(1.0 / 3.0, 0.0), line_map(1.0 / 3.0, 2.0 / 3.0)};
  const auto rep = log_ratio_check(GdIfs::from_maps(a), 0, GdIfs::from_maps(b), 0, 2);
  EXPECT_FALSE(rep.certifying);
  EXPECT_GT(rep.pairs.size(), 0u);
  EXPECT_EQ(rep.flagged, rep.pairs.size());
}

TEST(LogRatio, PowersAreRational) {
  const std::vector<Similarity> a{line_map(0.25, 0.0), line_map(0.25, 0.75)};
  const std::vector<Similarity> b{line_map(0.5, 0.0), line_map(0.5, 0.5)};
  const auto rep = log_ratio_check(GdIfs::from_maps(a), 0, GdIfs::from_maps(b), 0, 1);
  ASSERT_EQ(rep.pairs.size(), 4u);
  EXPECT_EQ(rep.flagged, 0u);
  for (const auto& p : rep.pairs) {
    EXPECT_EQ(p.rational->p, 2);
    EXPECT_EQ(p.rational->q, 1);
  }
  const auto same = log_ratio_check(GdIfs::from_maps(b), 0, GdIfs::from_maps(b), 0, 1);
  for (const auto& p : same.pairs) EXPECT_EQ(p.rational->p, p.rational->q);
}
