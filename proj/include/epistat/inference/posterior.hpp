#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "epistat/core/error.hpp"

namespace epistat {

/// Draws of a parameter vector, optionally with the latent infection times
/// that accompanied each draw.
struct PosteriorSample {
  std::vector<std::string> names;
  std::vector<std::vector<double>> draws;   // draws[k][param]
  std::vector<std::vector<double>> latent;  // empty unless requested
  double acceptance_rate = 0.0;
  std::size_t proposals = 0;
  std::size_t infeasible = 0;  // proposals rejected because the trajectory was impossible
  std::vector<double> ess;     // per parameter

  std::vector<double> column(std::size_t param) const {
    std::vector<double> c;
    c.reserve(draws.size());
    for (const auto& d : draws) c.push_back(d[param]);
    return c;
  }
};

struct EssResult {
  double ess = 0.0;
  bool degenerate = false;  // zero variance; ess reported as 0
};

/// Effective sample size: N / (1 + 2 sum_k rho_k), summing autocorrelations
/// until the first negative lag.
inline EssResult effective_sample_size(std::span<const double> x) {
  const auto n = x.size();
  if (n == 0) return {0.0, true};
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double c0 = 0.0;
  for (double v : x) c0 += (v - mean) * (v - mean);
  if (!(c0 > 0.0) || n < 2) return {0.0, true};
  double sum = 0.0;
  for (std::size_t lag = 1; lag < n; ++lag) {
    double c = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) c += (x[i] - mean) * (x[i + lag] - mean);
    const double rho = c / c0;
    if (rho < 0.0) break;
    sum += rho;
  }
  const double ess = static_cast<double>(n) / (1.0 + 2.0 * sum);
  return {std::min(ess, static_cast<double>(n)), false};
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
inline double sorted_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct CoordinateSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;  // equal-tailed credible bounds
  double upper = 0.0;
  double ess = 0.0;
  bool degenerate = false;
  double mcse() const { return ess > 0.0 ? sd / std::sqrt(ess) : 0.0; }
};

inline std::vector<CoordinateSummary> posterior_summary(const PosteriorSample& s,
                                                        double level = 0.95) {
  if (s.draws.empty()) throw DomainError("posterior summary of an empty sample");
  detail::require(level > 0.0 && level < 1.0, "credible level must lie in (0, 1)");
  const std::size_t p = s.draws.front().size();
  std::vector<CoordinateSummary> out;
  for (std::size_t j = 0; j < p; ++j) {
    auto col = s.column(j);
    CoordinateSummary c;
    c.name = j < s.names.size() ? s.names[j] : "param" + std::to_string(j + 1);
    double mean = 0.0;
    for (double v : col) mean += v;
    mean /= static_cast<double>(col.size());
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    c.mean = mean;
    c.sd = col.size() > 1 ? std::sqrt(ss / static_cast<double>(col.size() - 1)) : 0.0;
    const auto e = effective_sample_size(col);
    c.ess = e.ess;
    c.degenerate = e.degenerate;
    std::sort(col.begin(), col.end());
    c.lower = sorted_quantile(col, 0.5 * (1.0 - level));
    c.upper = sorted_quantile(col, 1.0 - 0.5 * (1.0 - level));
    out.push_back(c);
  }
  return out;
}

}  // namespace epistat
