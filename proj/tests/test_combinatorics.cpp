#include <gtest/gtest.h>

#include "support.hpp"

using namespace gdifs;

namespace {

// Oracle: count words by brute-force enumeration over all m^k words.
std::uint64_t brute_count(int k, const std::vector<int>& counts) {
  const int m = static_cast<int>(counts.size());
  std::uint64_t total = 0;
  std::vector<int> w(static_cast<size_t>(k), 0);
  while (true) {
    std::vector<int> c(static_cast<size_t>(m), 0);
    for (int l : w) ++c[static_cast<size_t>(l)];
    total += c == counts;
    size_t i = 0;
    while (i < w.size() && ++w[i] == m) w[i++] = 0;
    if (i == w.size()) break;
  }
  return total;
}

double log_bound(const std::vector<double>& p, const std::vector<int>& c, int k) {
  const double m = static_cast<double>(p.size());
  double v = std::log(std::pow(2.0, -2.0 * m - 1.0) * std::pow(k, -m / 2.0));
  for (size_t l = 0; l < p.size(); ++l) v -= c[l] * std::log(p[l]);
  return v;
}

}  // namespace

TEST(CountWords, Examples) {
  EXPECT_EQ(*count_words(3, std::vector<int>{2, 1}).exact, 3u);
  EXPECT_EQ(*count_words(5, std::vector<int>{5, 0}).exact, 1u);
  EXPECT_EQ(*count_words(4, std::vector<int>{2, 2}).exact, 6u);
  EXPECT_THROW(count_words(4, std::vector<int>{2, 1}), InputError);
  EXPECT_THROW(count_words(1, std::vector<int>{2, -1}), InputError);
}

TEST(CountWords, MatchesBruteForce) {
  for (int k = 1; k <= 8; ++k)
    for (int a = 0; a <= k; ++a)
      for (int b = 0; a + b <= k; ++b) {
        const std::vector<int> c{a, b, k - a - b};
        EXPECT_EQ(*count_words(k, c).exact, brute_count(k, c));
      }
}

TEST(CountWords, LogGammaMatchesExactUpTo20) {
  for (int k = 1; k <= 20; ++k)
    for (int a = 0; a <= k; ++a)
      for (int b = 0; a + b <= k; ++b) {
        const WordCount w = count_words(k, std::vector<int>{a, b, k - a - b});
        ASSERT_TRUE(w.exact);
        EXPECT_NEAR(w.log_count, std::log(static_cast<double>(*w.exact)), 1e-9);
      }
  EXPECT_FALSE(count_words(21, std::vector<int>{10, 11}).exact);
}

TEST(ChebyshevCounts, Examples) {
  const std::vector<double> p{0.5, 0.5};
  const WordCount w = chebyshev_counts(p, 10);
  EXPECT_EQ(w.counts, (std::vector<int>{5, 5}));
  EXPECT_EQ(*w.exact, 252u);
  EXPECT_GE(252.0, std::pow(2.0, -5) * 0.1 * std::pow(2.0, 10));

  const std::vector<double> one{1.0};
  for (int k : {1, 7, 30}) {
    const WordCount d = chebyshev_counts(one, k);
    EXPECT_EQ(d.counts, std::vector<int>{k});
    EXPECT_GE(std::exp(d.log_count), std::pow(2.0, -3) / std::sqrt(k));
  }
}

TEST(ChebyshevCounts, RejectsBadInput) {
  EXPECT_THROW(chebyshev_counts(std::vector<double>{0.5, 0.6}, 5), InputError);
  EXPECT_THROW(chebyshev_counts(std::vector<double>{1.0, 0.0}, 5), InputError);
  EXPECT_THROW(chebyshev_counts(std::vector<double>{0.5, 0.5}, 0), InputError);
}

TEST(ChebyshevCounts, BoundHoldsUpToFiveLetters) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int m = 2; m <= 5; ++m)
    for (int trial = 0; trial < 4; ++trial) {
      std::vector<double> p(static_cast<size_t>(m));
      double s = 0.0;
      for (auto& x : p) s += x = u(rng);
      for (auto& x : p) x /= s;
      for (int k = 8; k <= 60; k += (m >= 4 ? 13 : 1)) {
        const WordCount w = chebyshev_counts(p, k);
        int sum = 0;
        for (size_t l = 0; l < p.size(); ++l) {
          EXPECT_LT(std::abs(w.counts[l] - k * p[l]), std::sqrt(2.0 * k));
          sum += w.counts[l];
        }
        EXPECT_EQ(sum, k);
        EXPECT_GE(w.log_count, log_bound(p, w.counts, k) - 1e-9) << "m=" << m << " k=" << k;
      }
    }
}
