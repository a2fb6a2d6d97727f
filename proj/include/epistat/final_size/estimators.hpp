#pragma once

#include <cmath>
#include <string>

#include "epistat/core/error.hpp"

namespace epistat {

/// Point estimate with standard error and a label naming the formula used.
struct Estimate {
  double point = 0.0;
  double se = 0.0;
  std::string formula_id;
};

/// Final size of one outbreak among n initially susceptible individuals, with
/// n_immune additional individuals immune from the start.
struct FinalSizeObservation {
  long n = 0;
  long z = 0;
  long n_immune = 0;

  void validate() const {
    detail::require(n >= 2, "population size must be >= 2");
    detail::require(z >= 0 && z <= n, "final size must lie in [0, n]");
    detail::require(n_immune >= 0, "initially immune count must be >= 0");
  }
  /// Fraction initially susceptible.
  double susceptible_fraction() const {
    return static_cast<double>(n) / static_cast<double>(n + n_immune);
  }
};

/// Infected count z_m in a random sample of m from a population of n.
struct SampleObservation {
  long n = 0;
  long m = 0;
  long z_m = 0;

  void validate() const {
    detail::require(m >= 1 && m <= n, "sample size must satisfy 1 <= m <= n");
    detail::require(z_m >= 0 && z_m <= m, "sample infected count must lie in [0, m]");
  }
};

/// k isolated pairs, each with one inoculated and one susceptible member; z
/// susceptible partners became infected.
struct PairExperiment {
  long k = 0;
  long z = 0;
};

inline constexpr double default_cv = 1.0;

inline Estimate estimate_pair_prob(const PairExperiment& e) {
  detail::require(e.k >= 1, "pair experiment needs k >= 1");
  detail::require(e.z >= 0 && e.z <= e.k, "infected partners must lie in [0, k]");
  const double p = static_cast<double>(e.z) / static_cast<double>(e.k);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(e.k)), "pair_binomial"};
}

/// R0 when each individual has m_local neighbours, each infected with probability p.
inline double r0_from_local_contacts(double p, double m_local) {
  detail::require(p >= 0.0 && p <= 1.0, "transmission probability must lie in [0, 1]");
  detail::require(m_local >= 0.0, "local group size must be >= 0");
  return m_local * p;
}

/// Positive root of 1 - tau = exp(-R0 tau); 0 when R0 <= 1.
inline double solve_final_size(double r0) {
  detail::require(r0 >= 0.0 && std::isfinite(r0), "R0 must be finite and >= 0");
  if (r0 <= 1.0) return 0.0;
  // f(tau) = 1 - tau - exp(-R0 tau), written with expm1 so f stays accurate near 0.
  auto f = [r0](double tau) { return -tau - std::expm1(-r0 * tau); };
  double lo = 0.0;
  double hi = 1.0;
  // f > 0 just right of 0 (slope R0 - 1) and f(1) < 0.
  for (int it = 0; it < 2000 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return std::abs(f(lo)) <= std::abs(f(hi)) && lo > 0.0 ? lo : hi;
}

namespace detail {

inline void require_interior(double fraction, const char* what) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw DomainError(std::string(what) +
                      ": estimator undefined when nobody or everybody is infected "
                      "(log(0) or 0/0); need 0 < Z < n");
}

// -log(1 - x) / x
inline double r0_from_fraction(double x) { return -std::log1p(-x) / x; }

// Whole-population variance of R0-hat, before taking the square root.
inline double r0_population_variance(double x, double r0, double n, double cv) {
  return (1.0 + cv * cv * (1.0 - x) * r0 * r0) / (n * x * (1.0 - x));
}

// Additional variance from observing a sample of m out of n.
inline double r0_sampling_variance(double x, double r0, double n, double m) {
  const double d = 1.0 - (1.0 - x) * r0;
  return (1.0 - m / n) * d * d / (m * x * (1.0 - x));
}

}  // namespace detail

/// R0 from the final size of a single large outbreak. With initially immune
/// individuals, point and se are divided by the susceptible fraction s.
inline Estimate estimate_r0_final_size(const FinalSizeObservation& obs, double cv = default_cv) {
  obs.validate();
  detail::require(cv >= 0.0, "coefficient of variation must be >= 0");
  const double n = static_cast<double>(obs.n);
  const double x = static_cast<double>(obs.z) / n;
  detail::require_interior(x, "R0 final-size estimator");
  const double r0 = detail::r0_from_fraction(x);
  const double se = std::sqrt(detail::r0_population_variance(x, r0, n, cv));
  if (obs.n_immune == 0) return {r0, se, "r0_final_size"};
  const double s = obs.susceptible_fraction();
  return {r0 / s, se / s, "r0_final_size_immune"};
}

/// Critical vaccination coverage 1 - 1/R0 from the final size.
inline Estimate estimate_vc_final_size(const FinalSizeObservation& obs, double cv = default_cv) {
  obs.validate();
  detail::require(cv >= 0.0, "coefficient of variation must be >= 0");
  const double n = static_cast<double>(obs.n);
  const double x = static_cast<double>(obs.z) / n;
  detail::require_interior(x, "vc final-size estimator");
  const double r0 = detail::r0_from_fraction(x);
  const double se = std::sqrt(detail::r0_population_variance(x, r0, n, cv)) / (r0 * r0);
  if (obs.n_immune == 0) return {1.0 - 1.0 / r0, se, "vc_final_size"};
  const double s = obs.susceptible_fraction();
  return {1.0 - s / r0, se * s, "vc_final_size_immune"};
}

/// R0 from the infected count in a sample; the sampling term vanishes at m = n.
inline Estimate estimate_r0_sample(const SampleObservation& obs, double cv = default_cv) {
  obs.validate();
  detail::require(cv >= 0.0, "coefficient of variation must be >= 0");
  const double m = static_cast<double>(obs.m);
  const double x = static_cast<double>(obs.z_m) / m;
  detail::require_interior(x, "R0 sample estimator");
  const double r0 = detail::r0_from_fraction(x);
  const double n = static_cast<double>(obs.n);
  const double var = detail::r0_population_variance(x, r0, n, cv) +
                     detail::r0_sampling_variance(x, r0, n, m);
  return {r0, std::sqrt(var), "r0_sample"};
}

inline Estimate estimate_vc_sample(const SampleObservation& obs, double cv = default_cv) {
  obs.validate();
  detail::require(cv >= 0.0, "coefficient of variation must be >= 0");
  const double m = static_cast<double>(obs.m);
  const double x = static_cast<double>(obs.z_m) / m;
  detail::require_interior(x, "vc sample estimator");
  const double r0 = detail::r0_from_fraction(x);
  const double n = static_cast<double>(obs.n);
  const double r4 = r0 * r0 * r0 * r0;
  const double var = (detail::r0_population_variance(x, r0, n, cv) +
                      detail::r0_sampling_variance(x, r0, n, m)) /
                     r4;
  return {1.0 - 1.0 / r0, std::sqrt(var), "vc_sample"};
}

/// Share of the sample se^2 due to sampling alone.
inline double sampling_variance_share(const SampleObservation& obs, double cv = default_cv) {
  obs.validate();
  const double m = static_cast<double>(obs.m);
  const double n = static_cast<double>(obs.n);
  const double x = static_cast<double>(obs.z_m) / m;
  detail::require_interior(x, "sampling variance share");
  const double r0 = detail::r0_from_fraction(x);
  const double pop = detail::r0_population_variance(x, r0, n, cv);
  const double smp = detail::r0_sampling_variance(x, r0, n, m);
  return smp / (pop + smp);
}

}  // namespace epistat
