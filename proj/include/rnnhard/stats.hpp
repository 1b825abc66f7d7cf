#pragma once

#include <algorithm>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace rnnhard::stats {

// Kolmogorov limiting survival function Q(l) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 l^2).
inline double kolmogorov_q(double l) {
  if (l <= 0.0) return 1.0;
  if (l < 1.18) {
    // Theta-function form, fast for small l.
    const double y = std::exp(-std::numbers::pi * std::numbers::pi / (8.0 * l * l));
    double sum = 0.0;
    for (int j = 1; j <= 7; j += 2) sum += std::pow(y, j * j);
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / l * sum, 0.0, 1.0);
  }
  const double x = std::exp(-2.0 * l * l);
  double sum = 0.0, sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::pow(x, j * j);
    sum += sign * term;
    if (term < 1e-300) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov with the Stephens small-sample correction.
// Ties across samples are handled by stepping over equal values together.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("KS needs two non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double en = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_q((en + 0.12 + 0.11 / en) * d)};
}

// Exact two-sided binomial test. For p = 1/2 the tails are doubled; other p
// use the sum of outcome probabilities no larger than the observed one.
inline double binomial_two_sided_p(std::uint64_t k, std::uint64_t n, double p = 0.5) {
  if (k > n) throw std::invalid_argument("k > n");
  if (n == 0) return 1.0;
  boost::math::binomial_distribution<double> dist(static_cast<double>(n), p);
  const double kk = static_cast<double>(k);
  if (p == 0.5) {
    const double lower = boost::math::cdf(dist, kk);
    const double upper = k == 0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, kk - 1.0));
    return std::min(1.0, 2.0 * std::min(lower, upper));
  }
  const double observed = boost::math::pdf(dist, kk) * (1.0 + 1e-7);
  double total = 0.0;
  for (std::uint64_t x = 0; x <= n; ++x) {
    const double px = boost::math::pdf(dist, static_cast<double>(x));
    if (px <= observed) total += px;
  }
  return std::min(1.0, total);
}

struct ChiSquare {
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

inline ChiSquare chi_square(std::span<const double> observed, std::span<const double> expected, int fitted_params = 0) {
  if (observed.size() != expected.size() || observed.size() < 2) throw std::invalid_argument("chi-square needs matching bins");
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!(expected[i] > 0.0)) throw std::invalid_argument("expected counts must be positive");
    const double d = observed[i] - expected[i];
    stat += d * d / expected[i];
  }
  const double df = static_cast<double>(observed.size()) - 1.0 - fitted_params;
  boost::math::chi_squared_distribution<double> dist(df);
  return {stat, df, boost::math::cdf(boost::math::complement(dist, stat))};
}

struct Correlation {
  double r = 0.0;
  double p_value = 1.0;
  bool degenerate = false;  // constant input
};

// Pearson correlation between x and a 0/1 label, with the t-test p-value.
inline Correlation point_biserial(std::span<const double> x, std::span<const int> y) {
  if (x.size() != y.size() || x.size() < 3) throw std::invalid_argument("correlation needs >= 3 paired values");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  Correlation c;
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    c.degenerate = true;
    return c;
  }
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = n - 2.0;
  if (std::abs(c.r) >= 1.0) {
    c.p_value = 0.0;
    return c;
  }
  const double t = c.r * std::sqrt(df / (1.0 - c.r * c.r));
  boost::math::students_t_distribution<double> dist(df);
  c.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return c;
}

inline double normal_two_sided_p(double z) {
  boost::math::normal_distribution<double> dist;
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(z)));
}

// Upper quantile z with P(N(0,1) > z) = tail.
inline double normal_upper_quantile(double tail) {
  boost::math::normal_distribution<double> dist;
  return boost::math::quantile(boost::math::complement(dist, tail));
}

struct MomentTest {
  int order = 0;
  double a = 0.0, b = 0.0;  // sample raw moments
  double z = 0.0;
  double p_value = 1.0;
};

// Compares E[X^order] of two samples with a large-sample z-test.
inline MomentTest compare_moment(std::span<const double> a, std::span<const double> b, int order) {
  auto stats = [order](std::span<const double> v) {
    double m = 0.0, m2 = 0.0;
    for (double x : v) {
      const double p = std::pow(x, order);
      m += p;
      m2 += p * p;
    }
    const double n = static_cast<double>(v.size());
    m /= n;
    const double var = std::max(0.0, m2 / n - m * m);
    return std::pair{m, var / n};
  };
  const auto [ma, va] = stats(a);
  const auto [mb, vb] = stats(b);
  MomentTest t{order, ma, mb, 0.0, 1.0};
  const double se = std::sqrt(va + vb);
  const double scale = 1e-12 * (std::abs(ma) + std::abs(mb));
  if (se > scale) {
    t.z = (ma - mb) / se;
    t.p_value = normal_two_sided_p(t.z);
  } else {
    // Degenerate (constant) powers: only rounding may differ.
    t.p_value = std::abs(ma - mb) <= scale ? 1.0 : 0.0;
  }
  return t;
}

}  // namespace rnnhard::stats
