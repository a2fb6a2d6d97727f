#pragma once

// Small statistical oracles shared by the test binaries. They are written
// independently of the library code they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace oracle {

/// Root of a continuous f on [lo, hi] with a sign change, by plain bisection.
inline double bisect(const std::function<double(double)>& f, double lo, double hi) {
  double flo = f(lo);
  for (int i = 0; i < 400; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Limiting final fraction for a single-type SIR with reproduction number r0 > 1.
inline double final_fraction(double r0) {
  return bisect([r0](double t) { return 1.0 - t - std::exp(-r0 * t); }, 1e-9, 1.0);
}

inline double mean(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double variance(const std::vector<double>& x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

/// Kolmogorov-Smirnov statistic of a sample against a continuous cdf.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

/// Asymptotic p-value of the one-sample KS statistic (Stephens' correction).
inline double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double p = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    p += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

inline double ks_test(const std::vector<double>& x, const std::function<double(double)>& cdf) {
  return ks_pvalue(ks_statistic(x, cdf), x.size());
}

/// Pearson chi-square goodness-of-fit p-value. Adjacent cells are pooled until
/// every pooled expected count is at least 5. `estimated` parameters reduce
/// the degrees of freedom.
inline double chi_square_pvalue(const std::vector<double>& observed,
                                const std::vector<double>& expected, int estimated = 0) {
  std::vector<double> o, e;
  double co = 0.0, ce = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    co += observed[i];
    ce += expected[i];
    if (ce >= 5.0) {
      o.push_back(co);
      e.push_back(ce);
      co = ce = 0.0;
    }
  }
  if (ce > 0.0 || co > 0.0) {
    if (e.empty()) {
      o.push_back(co);
      e.push_back(ce);
    } else {
      o.back() += co;
      e.back() += ce;
    }
  }
  double stat = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) stat += (o[i] - e[i]) * (o[i] - e[i]) / e[i];
  const int df = static_cast<int>(o.size()) - 1 - estimated;
  if (df < 1) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), stat));
}

/// Two-sample chi-square test of homogeneity on count vectors of equal length.
inline double homogeneity_pvalue(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = std::accumulate(a.begin(), a.end(), 0.0);
  const double nb = std::accumulate(b.begin(), b.end(), 0.0);
  std::vector<double> ta, tb;
  double ca = 0.0, cb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca += a[i];
    cb += b[i];
    if (std::min(ca, cb) >= 5.0) {
      ta.push_back(ca);
      tb.push_back(cb);
      ca = cb = 0.0;
    }
  }
  if (ca + cb > 0.0) {
    if (ta.empty()) {
      ta.push_back(ca);
      tb.push_back(cb);
    } else {
      ta.back() += ca;
      tb.back() += cb;
    }
  }
  double stat = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    const double col = ta[i] + tb[i];
    const double ea = col * na / (na + nb);
    const double eb = col * nb / (na + nb);
    stat += (ta[i] - ea) * (ta[i] - ea) / ea + (tb[i] - eb) * (tb[i] - eb) / eb;
  }
  const int df = static_cast<int>(ta.size()) - 1;
  if (df < 1) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), stat));
}

/// Upper binomial tolerance: the largest count that a Binomial(n, p) exceeds
/// with probability below alpha, via the normal approximation.
inline double binomial_upper(double n, double p, double z = 3.0) {
  return n * p + z * std::sqrt(n * p * (1.0 - p));
}

/// Upper-tail p-value of a standard normal statistic.
inline double normal_upper_pvalue(double z) {
  return boost::math::cdf(boost::math::complement(boost::math::normal(), z));
}

}  // namespace oracle
