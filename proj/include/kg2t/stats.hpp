#pragma once

// Correlation and hypothesis tests used to analyse rating data.

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "kg2t/error.hpp"

namespace kg2t::stats {

struct TestResult {
  double statistic = 0;
  double p_value = 1;
  double df = 0;          // t-test degrees of freedom; 0 where not applicable
  std::string detail;     // e.g. table shape, number of enumerated tables
};

struct ContingencyTable {
  std::vector<std::string> row_labels, col_labels;
  std::vector<std::vector<std::uint64_t>> counts;

  std::size_t rows() const { return counts.size(); }
  std::size_t cols() const { return counts.empty() ? 0 : counts.front().size(); }
  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (const auto& r : counts) n = std::accumulate(r.begin(), r.end(), n);
    return n;
  }
};

inline double mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DegenerateSample("samples differ in length");
  if (x.size() < 2) throw DegenerateSample("need at least two pairs");
  double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) throw DegenerateSample("constant sample");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Two-sided paired t-test on x - y with n - 1 degrees of freedom.
inline TestResult paired_t_test(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DegenerateSample("samples differ in length");
  if (x.size() < 2) throw DegenerateSample("need at least two pairs");
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
  double md = mean(d);
  double ss = 0;
  for (double v : d) ss += (v - md) * (v - md);
  double n = double(d.size());
  double sd = std::sqrt(ss / (n - 1));
  if (sd == 0) throw DegenerateSample("differences have zero variance");
  double t = md / (sd / std::sqrt(n));
  boost::math::students_t dist(n - 1);
  double p = 2 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
  return {t, std::min(1.0, p), n - 1, "paired, n=" + std::to_string(d.size())};
}

namespace detail {

inline double poly(std::span<const double> c, double x) {
  double r = 0;
  for (std::size_t i = c.size(); i-- > 0;) r = r * x + c[i];
  return r;
}

}  // namespace detail

// Shapiro-Wilk W with Royston's (1992, 1995) coefficient and p-value
// approximations, valid for 3 <= n <= 5000.
inline TestResult shapiro_wilk(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 3 || n > 5000)
    throw SampleSizeOutOfRange("Shapiro-Wilk needs 3..5000 values, got " + std::to_string(n));
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  if (x.back() - x.front() < 1e-19) throw DegenerateSample("all values are identical");

  static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
  static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  static constexpr double c3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
  static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
  static constexpr double g[] = {-2.273, 0.459};

  const std::size_t half = n / 2;
  const double an = double(n);
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
  } else {
    boost::math::normal norm;
    std::vector<double> m(half);
    double summ2 = 0;
    for (std::size_t i = 0; i < half; ++i) {
      m[i] = boost::math::quantile(norm, (double(i + 1) - 0.375) / (an + 0.25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2;
    double ssumm2 = std::sqrt(summ2);
    double rsn = 1 / std::sqrt(an);
    double a1 = detail::poly(c1, rsn) - m[0] / ssumm2;
    std::size_t first;
    double fac;
    if (n > 5) {
      first = 2;
      double a2 = -m[1] / ssumm2 + detail::poly(c2, rsn);
      fac = std::sqrt((summ2 - 2 * m[0] * m[0] - 2 * m[1] * m[1]) /
                      (1 - 2 * a1 * a1 - 2 * a2 * a2));
      a[1] = a2;
    } else {
      first = 1;
      fac = std::sqrt((summ2 - 2 * m[0] * m[0]) / (1 - 2 * a1 * a1));
    }
    a[0] = a1;
    for (std::size_t i = first; i < half; ++i) a[i] = -m[i] / fac;
  }

  double mx = std::accumulate(x.begin(), x.end(), 0.0) / an;
  double ssq = 0;
  for (double v : x) ssq += (v - mx) * (v - mx);
  double num = 0;
  for (std::size_t i = 0; i < half; ++i) num += a[i] * (x[n - 1 - i] - x[i]);
  double w = std::min(1.0, num * num / ssq);

  double pw;
  if (n == 3) {
    constexpr double pi6 = 1.90985931710274;   // 6 / pi
    constexpr double stqr = 1.04719755119660;  // pi / 3
    pw = std::max(0.0, pi6 * (std::asin(std::sqrt(w)) - stqr));
  } else {
    double w1 = std::log(1 - w);
    double xx = std::log(an);
    double m, s;
    if (n <= 11) {
      double gamma = detail::poly(g, an);
      if (w1 >= gamma) return {w, 1e-99, 0, "n=" + std::to_string(n)};
      w1 = -std::log(gamma - w1);
      m = detail::poly(c3, an);
      s = std::exp(detail::poly(c4, an));
    } else {
      m = detail::poly(c5, xx);
      s = std::exp(detail::poly(c6, xx));
    }
    boost::math::normal z(m, s);
    pw = boost::math::cdf(boost::math::complement(z, w1));
  }
  return {w, std::clamp(pw, 0.0, 1.0), 0, "n=" + std::to_string(n)};
}

namespace detail {

inline double log_factorial(std::uint64_t k) { return std::lgamma(double(k) + 1.0); }

}  // namespace detail

inline constexpr std::uint64_t kDefaultEnumerationBudget = 20'000'000;

// Fisher's exact test for an r x c table. The two-sided p-value sums the
// probability of every table with the observed margins whose probability
// does not exceed the observed one (relative tolerance 1e-7). Empty rows and
// columns are dropped; fewer than two remaining rows or columns give p = 1.
inline TestResult fisher_exact(const ContingencyTable& table,
                               std::uint64_t budget = kDefaultEnumerationBudget) {
  std::vector<std::uint64_t> rows, cols;
  std::vector<std::size_t> keep_r, keep_c;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    auto s = std::accumulate(table.counts[i].begin(), table.counts[i].end(), std::uint64_t{0});
    if (s) {
      rows.push_back(s);
      keep_r.push_back(i);
    }
  }
  for (std::size_t j = 0; j < table.cols(); ++j) {
    std::uint64_t s = 0;
    for (const auto& r : table.counts) s += r[j];
    if (s) {
      cols.push_back(s);
      keep_c.push_back(j);
    }
  }
  std::string shape = std::to_string(table.rows()) + "x" + std::to_string(table.cols());
  if (rows.size() < 2 || cols.size() < 2)
    return {1.0, 1.0, 0, shape + " table, degenerate margins"};

  const std::uint64_t total = std::accumulate(rows.begin(), rows.end(), std::uint64_t{0});
  double log_const = -detail::log_factorial(total);
  for (auto r : rows) log_const += detail::log_factorial(r);
  for (auto c : cols) log_const += detail::log_factorial(c);

  double log_obs = log_const;
  for (auto i : keep_r)
    for (auto j : keep_c) log_obs -= detail::log_factorial(table.counts[i][j]);
  const double p_obs = std::exp(log_obs);
  const double cutoff = p_obs * (1 + 1e-7);

  const std::size_t R = rows.size(), C = cols.size();
  std::vector<std::uint64_t> col_left = cols;
  std::uint64_t visited = 0;
  double p = 0;

  // Fill row by row; the last row is forced by the remaining column sums,
  // and within a row the last cell is forced by the row sum.
  std::function<void(std::size_t, std::size_t, std::uint64_t, double)> fill =
      [&](std::size_t r, std::size_t c, std::uint64_t row_left, double log_p) {
        if (r == R - 1) {
          double lp = log_p;
          for (std::size_t j = 0; j < C; ++j) lp -= detail::log_factorial(col_left[j]);
          if (++visited > budget)
            throw TableTooLarge("more than " + std::to_string(budget) + " tables to enumerate");
          double prob = std::exp(lp);
          if (prob <= cutoff) p += prob;
          return;
        }
        if (c == C - 1) {
          if (row_left > col_left[c]) return;
          col_left[c] -= row_left;
          fill(r + 1, 0, r + 1 < R ? rows[r + 1] : 0, log_p - detail::log_factorial(row_left));
          col_left[c] += row_left;
          return;
        }
        // Remaining columns after c must absorb what this cell leaves.
        std::uint64_t later = 0;
        for (std::size_t j = c + 1; j < C; ++j) later += col_left[j];
        std::uint64_t lo = row_left > later ? row_left - later : 0;
        std::uint64_t hi = std::min(row_left, col_left[c]);
        for (std::uint64_t v = lo; v <= hi; ++v) {
          col_left[c] -= v;
          fill(r, c + 1, row_left - v, log_p - detail::log_factorial(v));
          col_left[c] += v;
        }
      };
  fill(0, 0, rows[0], log_const);
  return {p_obs, std::clamp(p, 0.0, 1.0), 0,
          shape + " table, " + std::to_string(visited) + " tables enumerated"};
}

}  // namespace kg2t::stats
