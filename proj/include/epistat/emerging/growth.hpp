#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "epistat/core/error.hpp"
#include "epistat/core/event_log.hpp"
#include "epistat/numeric/glm.hpp"

namespace epistat {

/// Counts of new cases per reporting period of fixed length.
struct IncidenceSeries {
  std::vector<long> counts;
  double period_length = 1.0;
};

/// Inclusive index range [first, last] into an IncidenceSeries.
struct Window {
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t size() const { return last - first + 1; }
};

struct GrowthEstimate {
  double r = 0.0;   // per time unit
  double se = 0.0;
};

enum class GrowthMethod {
  poisson_regression,  // log-linear count regression (handles zero counts)
  log_least_squares,   // ordinary least squares on log counts
};

/// Exponential growth rate over a window of an incidence series.
inline GrowthEstimate estimate_growth_rate(const IncidenceSeries& series, Window window,
                                           GrowthMethod method = GrowthMethod::poisson_regression) {
  detail::require(series.period_length > 0.0, "period length must be > 0");
  detail::require(window.first <= window.last && window.last < series.counts.size(),
                  "window out of range");
  detail::require(window.size() >= 3, "growth-rate regression needs at least 3 periods");
  const auto m = static_cast<Eigen::Index>(window.size());
  Eigen::MatrixXd x(m, 2);
  Eigen::VectorXd y(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const long c = series.counts[window.first + static_cast<std::size_t>(k)];
    detail::require(c >= 0, "counts must be >= 0");
    x(k, 0) = 1.0;
    x(k, 1) = static_cast<double>(k) * series.period_length;
    y(k) = static_cast<double>(c);
  }
  if (y.sum() <= 0.0) throw DomainError("growth-rate window contains only zero counts");

  if (method == GrowthMethod::poisson_regression) {
    const auto fit = numeric::poisson_glm(x, y);
    return {fit.beta(1), std::sqrt(fit.covariance(1, 1))};
  }
  if ((y.array() <= 0.0).any())
    throw DomainError("least squares on log counts cannot handle zero counts");
  const Eigen::VectorXd ly = y.array().log().matrix();
  const Eigen::MatrixXd xtx = x.transpose() * x;
  const Eigen::VectorXd beta = xtx.ldlt().solve(x.transpose() * ly);
  const double rss = (ly - x * beta).squaredNorm();
  const double sigma2 = rss / static_cast<double>(m - 2);
  return {beta(1), std::sqrt(sigma2 * xtx.inverse()(1, 1))};
}

/// Bins infection events of a log into consecutive periods starting at t = 0.
inline IncidenceSeries incidence_from_log(const EventLog& log, double period_length) {
  detail::require(period_length > 0.0, "period length must be > 0");
  IncidenceSeries s{{}, period_length};
  for (const Event& e : log.events) {
    if (e.kind != EventKind::infection) continue;
    const auto bin = static_cast<std::size_t>(std::floor(e.time / period_length));
    if (s.counts.size() <= bin) s.counts.resize(bin + 1, 0);
    ++s.counts[bin];
  }
  return s;
}

}  // namespace epistat
