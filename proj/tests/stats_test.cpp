#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "kg2t/stats.hpp"
#include "test_util.hpp"

using namespace kg2t;
using namespace kg2t::stats;
namespace kt = kg2t::testing;

namespace {

ContingencyTable table(std::vector<std::vector<std::uint64_t>> counts) {
  ContingencyTable t;
  for (std::size_t i = 0; i < counts.size(); ++i) t.row_labels.push_back("r" + std::to_string(i));
  for (std::size_t j = 0; j < counts.front().size(); ++j)
    t.col_labels.push_back("c" + std::to_string(j));
  t.counts = std::move(counts);
  return t;
}

std::uint64_t choose(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Exact two-sided 2x2 oracle: integer hypergeometric weights C(r1,a) C(r2,c1-a)
// over C(n,c1), summing every weight not above the observed one.
double fisher_2x2_oracle(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  std::uint64_t r1 = a + b, r2 = c + d, c1 = a + c, n = r1 + r2;
  std::uint64_t obs = choose(r1, a) * choose(r2, c);
  std::uint64_t lo = c1 > r2 ? c1 - r2 : 0, hi = std::min(r1, c1);
  std::uint64_t tail = 0;
  for (std::uint64_t x = lo; x <= hi; ++x) {
    std::uint64_t w = choose(r1, x) * choose(r2, c1 - x);
    if (w <= obs) tail += w;
  }
  return double(tail) / double(choose(n, c1));
}

}  // namespace

TEST(Fisher, TwoByTwoHandCases) {
  EXPECT_NEAR(fisher_exact(table({{2, 0}, {0, 2}})).p_value, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(fisher_exact(table({{1, 1}, {1, 1}})).p_value, 1.0, 1e-12);
}

TEST(Fisher, MatchesFrozenReferenceValues) {
  // scipy.stats.fisher_exact for 2x2; exact rational enumeration for r x c.
  struct Case {
    std::vector<std::vector<std::uint64_t>> t;
    double p;
  };
  const Case cases[] = {
      {{{3, 1}, {1, 3}}, 0.48571428571428565},
      {{{8, 2}, {1, 5}}, 0.034965034965034975},
      {{{10, 0}, {0, 10}}, 1.082508822446903e-05},
      {{{12, 5}, {7, 9}}, 0.16632006577356484},
      {{{3, 1}, {1, 3}, {2, 2}}, 59.0 / 77.0},
      {{{5, 0, 1}, {1, 4, 2}}, 59.0 / 1716.0},
      {{{2, 3, 4}, {6, 1, 0}, {1, 1, 5}}, 299008.0 / 11685817.0},
  };
  for (const auto& c : cases) EXPECT_NEAR(fisher_exact(table(c.t)).p_value, c.p, 1e-9);
}

TEST(Fisher, AgreesWithBruteForceOnAllSmallTables) {
  std::size_t n_tables = 0;
  for (std::uint64_t a = 0; a <= 20; ++a)
    for (std::uint64_t b = 0; a + b <= 20; ++b)
      for (std::uint64_t c = 0; a + b + c <= 20; ++c)
        for (std::uint64_t d = 0; a + b + c + d <= 20; ++d) {
          ++n_tables;
          double p = fisher_exact(table({{a, b}, {c, d}})).p_value;
          ASSERT_NEAR(p, fisher_2x2_oracle(a, b, c, d), 1e-9) << a << " " << b << " " << c << " " << d;
          ASSERT_GT(p, 0.0);
          ASSERT_LE(p, 1.0);
        }
  EXPECT_EQ(n_tables, 10626u);
}

TEST(Fisher, TranspositionInvariant) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t R = 2 + rng() % 2, C = 2 + rng() % 2;
    std::vector<std::vector<std::uint64_t>> t(R, std::vector<std::uint64_t>(C));
    for (auto& row : t)
      for (auto& v : row) v = rng() % 6;
    std::vector<std::vector<std::uint64_t>> tt(C, std::vector<std::uint64_t>(R));
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < C; ++j) tt[j][i] = t[i][j];
    auto swapped = t;
    std::swap(swapped.front(), swapped.back());
    double p = fisher_exact(table(t)).p_value;
    EXPECT_NEAR(p, fisher_exact(table(tt)).p_value, 1e-9);
    EXPECT_NEAR(p, fisher_exact(table(swapped)).p_value, 1e-9);
  }
}

TEST(Fisher, DegenerateColumnGivesOne) {
  EXPECT_EQ(fisher_exact(table({{5, 0}, {7, 0}, {2, 0}})).p_value, 1.0);
}

TEST(Fisher, BudgetExceededThrows) {
  auto big = table({{30, 30, 30, 30}, {30, 30, 30, 30}, {30, 30, 30, 30}, {30, 30, 30, 30}});
  EXPECT_THROW(fisher_exact(big, 1000), TableTooLarge);
}

TEST(PairedT, HandDerivedCase) {
  std::vector<double> x = {1, 2, 3}, y = {2, 3, 5};
  auto r = paired_t_test(x, y);
  EXPECT_NEAR(std::fabs(r.statistic), 4.0, 1e-9);
  EXPECT_EQ(r.df, 2.0);
  // df = 2: p = 1 - t / sqrt(2 + t^2)
  EXPECT_NEAR(r.p_value, 1 - 4.0 / std::sqrt(18.0), 1e-12);
  EXPECT_NEAR(r.p_value, 0.0572, 1e-3);
}

TEST(PairedT, SwapNegatesStatistic) {
  std::mt19937 rng(3);
  std::normal_distribution<double> nd(3.5, 0.6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(12), y(12);
    for (auto& v : x) v = nd(rng);
    for (auto& v : y) v = nd(rng);
    auto a = paired_t_test(x, y), b = paired_t_test(y, x);
    EXPECT_NEAR(a.statistic, -b.statistic, 1e-12);
    EXPECT_NEAR(a.p_value, b.p_value, 1e-12);
  }
}

TEST(PairedT, ZeroVarianceDifferencesThrow) {
  std::vector<double> x = {1, 2, 3};
  EXPECT_THROW(paired_t_test(x, x), DegenerateSample);
  std::vector<double> y = {2, 3, 4};
  EXPECT_THROW(paired_t_test(x, y), DegenerateSample);
  std::vector<double> one = {1};
  EXPECT_THROW(paired_t_test(one, one), DegenerateSample);
}

TEST(Pearson, IdentityAndReversal) {
  std::vector<double> x = {1, 2, 3, 4, 5}, rev = {5, 4, 3, 2, 1};
  EXPECT_NEAR(pearson(x, x), 1.0, 1e-12);
  EXPECT_NEAR(pearson(x, rev), -1.0, 1e-12);
}

TEST(Pearson, FrozenReferenceValue) {
  std::vector<double> x = {1, 2, 3, 4, 5.5}, y = {2, 1, 4, 3, 7};
  EXPECT_NEAR(pearson(x, y), 0.8580868382401787, 1e-12);  // scipy.stats.pearsonr
}

TEST(Pearson, PositiveAffineInvariance) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(1, 5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(20), y(20), ax(20);
    for (auto& v : x) v = u(rng);
    for (auto& v : y) v = u(rng);
    double a = 0.1 + u(rng), b = u(rng) - 3;
    for (std::size_t i = 0; i < x.size(); ++i) ax[i] = a * x[i] + b;
    EXPECT_NEAR(pearson(ax, y), pearson(x, y), 1e-9);
  }
}

TEST(Pearson, ConstantSampleThrows) {
  std::vector<double> c = {3, 3, 3}, x = {1, 2, 3};
  EXPECT_THROW(pearson(c, x), DegenerateSample);
  EXPECT_THROW(pearson(x, std::vector<double>{1, 2}), DegenerateSample);
}

TEST(Shapiro, MatchesReferenceOracle) {
  auto ref = nlohmann::json::parse(kt::slurp(kt::fixture_path("shapiro_reference.json")));
  ASSERT_EQ(ref.size(), 10u);
  for (const auto& c : ref) {
    auto x = c["x"].get<std::vector<double>>();
    auto r = shapiro_wilk(x);
    EXPECT_NEAR(r.statistic, c["w"].get<double>(), 1e-3) << "n=" << x.size();
    EXPECT_NEAR(r.p_value, c["p"].get<double>(), 5e-3) << "n=" << x.size();
  }
}

TEST(Shapiro, EvenlySpacedIsNearNormal) {
  std::vector<double> x(50);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = -1 + 2.0 * double(i) / 49.0;
  EXPECT_GT(shapiro_wilk(x).statistic, 0.95);
}

TEST(Shapiro, OutlierRejectsNormality) {
  std::vector<double> x(20, 4.0);
  x.push_back(1.0);
  EXPECT_LT(shapiro_wilk(x).p_value, 0.05);
}

TEST(Shapiro, SizeLimits) {
  EXPECT_THROW(shapiro_wilk(std::vector<double>{1, 2}), SampleSizeOutOfRange);
  EXPECT_THROW(shapiro_wilk(std::vector<double>(5001, 1.0)), SampleSizeOutOfRange);
  EXPECT_THROW(shapiro_wilk(std::vector<double>{2, 2, 2, 2}), DegenerateSample);
}
