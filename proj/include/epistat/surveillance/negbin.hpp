#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "epistat/core/error.hpp"
#include "epistat/core/rng.hpp"

namespace epistat {

/// Negative binomial with mean mu and variance mu (1 + phi mu): size 1/phi,
/// success probability 1/(1 + phi mu). phi = 0 is the Poisson distribution.
struct NegBin {
  double mu = 1.0;
  double phi = 0.0;

  void validate() const {
    detail::require(mu > 0.0 && std::isfinite(mu), "negative binomial mean must be finite and > 0");
    detail::require(phi >= 0.0 && std::isfinite(phi), "dispersion must be finite and >= 0");
  }

  double variance() const { return mu * (1.0 + phi * mu); }

  double log_pmf(long y) const {
    if (y < 0) return -std::numeric_limits<double>::infinity();
    const double yd = static_cast<double>(y);
    if (phi == 0.0) return yd * std::log(mu) - mu - std::lgamma(yd + 1.0);
    const double lp = std::log1p(phi * mu);
    // log1p(phi mu) / phi, accurate as phi -> 0.
    const double tail = phi * mu < 1e-8 ? mu * (1.0 - 0.5 * phi * mu) : lp / phi;
    double head = 0.0;
    if (y <= 1'000'000) {
      head = yd * std::log(mu);
      for (long j = 1; j < y; ++j) head += std::log1p(static_cast<double>(j) * phi);
    } else {
      const double k = 1.0 / phi;
      head = std::lgamma(yd + k) - std::lgamma(k) + yd * std::log(phi * mu);
    }
    return head - yd * lp - tail - std::lgamma(yd + 1.0);
  }

  double pmf(long y) const { return std::exp(log_pmf(y)); }

  /// P(Y <= y), summed with the exact one-step ratio in log space.
  double cdf(long y) const {
    if (y < 0) return 0.0;
    double lp = log_pmf(0);
    double total = std::exp(lp);
    const double lq = phi == 0.0 ? 0.0 : std::log1p(phi * mu);
    for (long j = 0; j < y; ++j) {
      lp += std::log(mu * (1.0 + static_cast<double>(j) * phi)) - lq -
            std::log(static_cast<double>(j) + 1.0);
      total += std::exp(lp);
    }
    return std::min(total, 1.0);
  }

  /// Smallest y with P(Y <= y) >= q.
  long quantile(double q) const {
    detail::require(q > 0.0 && q < 1.0, "quantile level must lie in (0, 1)");
    double lp = log_pmf(0);
    double total = std::exp(lp);
    const double lq = phi == 0.0 ? 0.0 : std::log1p(phi * mu);
    long y = 0;
    while (total < q) {
      lp += std::log(mu * (1.0 + static_cast<double>(y) * phi)) - lq -
            std::log(static_cast<double>(y) + 1.0);
      ++y;
      const double add = std::exp(lp);
      total += add;
      // Past the mean and adding nothing: rounding has capped the sum.
      if (add == 0.0 && static_cast<double>(y) > mu) break;
    }
    return y;
  }

  /// Gamma-Poisson mixture draw.
  long sample(Rng& rng) const {
    if (phi == 0.0) return rng.poisson(mu);
    const double k = 1.0 / phi;
    return rng.poisson(rng.gamma(k, k / mu));
  }
};

}  // namespace epistat
