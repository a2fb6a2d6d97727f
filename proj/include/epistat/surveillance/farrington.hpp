#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epistat/core/error.hpp"
#include "epistat/numeric/glm.hpp"
#include "epistat/surveillance/negbin.hpp"

namespace epistat {

inline constexpr const char* farrington_formula_id = "farrington_loglinear_trend_negbin_quantile";

struct FarringtonConfig {
  int b = 5;            // years of history
  int w_half = 3;       // weeks either side of the current week
  double q = 0.995;     // predictive quantile
  long min_total = 5;   // smaller reference totals are not assessed
  int period = 52;      // weeks per year
  double trend_z = 1.96;

  void validate() const {
    detail::require(b >= 1, "need at least one year of history (b >= 1)");
    detail::require(w_half >= 0, "half-window must be >= 0");
    detail::require(q > 0.5 && q < 1.0, "quantile level must lie in (0.5, 1)");
    detail::require(period >= 1 && 2 * w_half + 1 <= period, "window wider than a year");
    detail::require(min_total >= 0, "minimum total must be >= 0");
  }
};

enum class FarringtonStatus { assessed, insufficient_history, sparse_history };

inline std::string to_string(FarringtonStatus s) {
  switch (s) {
    case FarringtonStatus::assessed: return "assessed";
    case FarringtonStatus::insufficient_history: return "insufficient_history";
    case FarringtonStatus::sparse_history: return "sparse_history";
  }
  return "?";
}

struct FarringtonResult {
  std::size_t s = 0;
  long y_s = 0;
  FarringtonStatus status = FarringtonStatus::insufficient_history;
  double mu_s = std::nan("");
  double phi = std::nan("");
  long g_s = -1;
  bool alarm = false;
  bool trend = false;
  bool assessable() const { return status == FarringtonStatus::assessed; }
};

/// Reference indices: weeks s - y*period + d for y = 1..b and |d| <= w_half.
inline std::optional<std::vector<std::size_t>> farrington_reference_indices(
    std::size_t s, const FarringtonConfig& cfg) {
  const long earliest = static_cast<long>(s) - static_cast<long>(cfg.b) * cfg.period - cfg.w_half;
  if (earliest < 0) return std::nullopt;
  std::vector<std::size_t> idx;
  for (int y = cfg.b; y >= 1; --y)
    for (int d = -cfg.w_half; d <= cfg.w_half; ++d)
      idx.push_back(static_cast<std::size_t>(static_cast<long>(s) - y * cfg.period + d));
  return idx;
}

/// Threshold for week s of a single series. A log-linear Poisson model with
/// time trend is fitted to the reference values; the trend is kept only when
/// significant and the prediction does not exceed the largest reference value.
/// The predictive is negative binomial with the fitted mean and a dispersion
/// matching the quasi-Poisson variance plus the estimation variance of mu_s.
inline FarringtonResult farrington_threshold(std::span<const long> series, std::size_t s,
                                             const FarringtonConfig& cfg) {
  cfg.validate();
  detail::require(s < series.size(), "current index beyond the series");
  FarringtonResult out;
  out.s = s;
  out.y_s = series[s];
  const auto idx = farrington_reference_indices(s, cfg);
  if (!idx) return out;
  const auto n = static_cast<Eigen::Index>(idx->size());
  Eigen::VectorXd y(n);
  long total = 0;
  double ymax = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const long v = series[(*idx)[static_cast<std::size_t>(i)]];
    detail::require(v >= 0, "counts must be >= 0");
    y(i) = static_cast<double>(v);
    total += v;
    ymax = std::max(ymax, y(i));
  }
  if (total < std::max(cfg.min_total, 1L)) {
    out.status = FarringtonStatus::sparse_history;
    return out;
  }

  // Time in years relative to the current week.
  Eigen::MatrixXd x(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = (static_cast<double>((*idx)[static_cast<std::size_t>(i)]) - static_cast<double>(s)) /
              cfg.period;
  }
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.0;

  auto dispersion = [&](const numeric::PoissonGlmFit& f, Eigen::Index p) {
    return std::max(1.0, f.pearson_chi2 / static_cast<double>(std::max<Eigen::Index>(n - p, 1)));
  };

  std::optional<numeric::PoissonGlmFit> fit;
  Eigen::VectorXd xs = x0;
  double psi = 1.0;
  try {
    auto tf = numeric::poisson_glm(x, y);
    const double psi_t = dispersion(tf, 2);
    const double z = tf.beta(1) / std::sqrt(psi_t * tf.covariance(1, 1));
    const double mu_t = std::exp(tf.beta(0));
    if (std::abs(z) > cfg.trend_z && mu_t <= ymax) {
      fit = std::move(tf);
      psi = psi_t;
      out.trend = true;
    }
  } catch (const ConvergenceError&) {
    // Separated data: the trend coefficient diverges, so drop the trend.
  }
  if (!fit) {
    fit = numeric::poisson_glm(x.leftCols(1), y);
    psi = dispersion(*fit, 1);
    xs = x0.head(1);
  }
  const double eta = xs.dot(fit->beta);
  const double var_eta = psi * xs.dot(fit->covariance * xs);
  out.mu_s = std::exp(eta);
  // mu (1 + phi mu) = psi mu + mu^2 var_eta
  out.phi = (psi - 1.0) / out.mu_s + var_eta;
  out.g_s = NegBin{out.mu_s, out.phi}.quantile(cfg.q);
  out.alarm = out.y_s > out.g_s;
  out.status = FarringtonStatus::assessed;
  return out;
}

struct DetectorResult {
  std::vector<FarringtonResult> weeks;
  std::optional<std::size_t> alarm_time;  // first assessed week with an alarm
};

/// Runs the detector on weeks start..end-1 (end defaults to the series length).
inline DetectorResult run_detector(std::span<const long> series, const FarringtonConfig& cfg,
                                   std::size_t start = 0,
                                   std::optional<std::size_t> end = std::nullopt) {
  cfg.validate();
  const std::size_t stop = std::min(end.value_or(series.size()), series.size());
  DetectorResult out;
  for (std::size_t s = start; s < stop; ++s) {
    out.weeks.push_back(farrington_threshold(series, s, cfg));
    const auto& r = out.weeks.back();
    if (r.assessable() && r.alarm && !out.alarm_time) out.alarm_time = s;
  }
  return out;
}

}  // namespace epistat
