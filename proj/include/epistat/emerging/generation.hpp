#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "epistat/core/error.hpp"
#include "epistat/core/rng.hpp"

namespace epistat {

/// Generation-time distribution g(t): the infection-age profile of
/// infectiousness, normalized to one. mu(t) = R0 g(t).
class GenerationTimeDist {
 public:
  struct Exponential { double rate; };
  struct Fixed { double time; };
  struct Gamma { double shape; double rate; };
  struct Empirical { std::vector<double> sample; };
  using Kind = std::variant<Exponential, Fixed, Gamma, Empirical>;

  static GenerationTimeDist exponential(double rate) {
    detail::require(rate > 0.0, "exponential rate must be > 0");
    return GenerationTimeDist(Exponential{rate});
  }
  static GenerationTimeDist fixed(double time) {
    detail::require(time > 0.0, "fixed generation time must be > 0");
    return GenerationTimeDist(Fixed{time});
  }
  static GenerationTimeDist gamma(double shape, double rate) {
    detail::require(shape > 0.0 && rate > 0.0, "gamma shape and rate must be > 0");
    return GenerationTimeDist(Gamma{shape, rate});
  }
  static GenerationTimeDist empirical(std::vector<double> sample) {
    if (sample.empty()) throw DomainError("empirical generation times: empty sample");
    for (double t : sample)
      if (!std::isfinite(t) || t < 0.0)
        throw DomainError("empirical generation times must be finite and >= 0");
    return GenerationTimeDist(Empirical{std::move(sample)});
  }

  const Kind& kind() const noexcept { return kind_; }

  double mean() const {
    return std::visit(
        [](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Exponential>) return 1.0 / d.rate;
          else if constexpr (std::is_same_v<T, Fixed>) return d.time;
          else if constexpr (std::is_same_v<T, Gamma>) return d.shape / d.rate;
          else
            return std::accumulate(d.sample.begin(), d.sample.end(), 0.0) /
                   static_cast<double>(d.sample.size());
        },
        kind_);
  }

  /// Density g(t). The fixed kind is a point mass and has no density; the
  /// empirical kind returns a histogram estimate that integrates to one.
  double density(double t) const {
    if (t < 0.0) return 0.0;
    return std::visit(
        [t](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Exponential>) return d.rate * std::exp(-d.rate * t);
          else if constexpr (std::is_same_v<T, Fixed>)
            throw DomainError("fixed generation time has no density (point mass)");
          else if constexpr (std::is_same_v<T, Gamma>)
            return std::exp(d.shape * std::log(d.rate) + (d.shape - 1.0) * std::log(t) -
                            d.rate * t - std::lgamma(d.shape));
          else
            return histogram_density(d.sample, t);
        },
        kind_);
  }

  /// Infimum of r for which the Laplace transform is finite (-inf if none).
  double laplace_lower_bound() const {
    return std::visit(
        [](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Exponential>) return -d.rate;
          else if constexpr (std::is_same_v<T, Gamma>) return -d.rate;
          else return -std::numeric_limits<double>::infinity();
        },
        kind_);
  }

  /// log of the Laplace transform, log integral of e^{-rt} g(t) dt.
  double log_laplace(double r) const {
    if (!(r > laplace_lower_bound()))
      throw DomainError("Laplace transform of the generation-time distribution diverges at r = " +
                        std::to_string(r));
    return std::visit(
        [r](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Exponential>) return std::log(d.rate) - std::log(d.rate + r);
          else if constexpr (std::is_same_v<T, Fixed>) return -r * d.time;
          else if constexpr (std::is_same_v<T, Gamma>)
            return d.shape * (std::log(d.rate) - std::log(d.rate + r));
          else {
            double top = -std::numeric_limits<double>::infinity();
            for (double t : d.sample) top = std::max(top, -r * t);
            double acc = 0.0;
            for (double t : d.sample) acc += std::exp(-r * t - top);
            return top + std::log(acc) - std::log(static_cast<double>(d.sample.size()));
          }
        },
        kind_);
  }

  double laplace(double r) const { return std::exp(log_laplace(r)); }

  double sample(Rng& rng) const {
    return std::visit(
        [&rng](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Exponential>) return rng.exponential(d.rate);
          else if constexpr (std::is_same_v<T, Fixed>) return d.time;
          else if constexpr (std::is_same_v<T, Gamma>) return rng.gamma(d.shape, d.rate);
          else return d.sample[rng.index(d.sample.size())];
        },
        kind_);
  }

 private:
  explicit GenerationTimeDist(Kind k) : kind_(std::move(k)) {}

  static double histogram_density(const std::vector<double>& sample, double t) {
    const auto [lo_it, hi_it] = std::minmax_element(sample.begin(), sample.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    const auto bins = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(sample.size())))));
    if (hi == lo) return 0.0;  // point mass
    const double width = (hi - lo) / static_cast<double>(bins);
    if (t < lo || t > hi) return 0.0;
    auto bin_of = [&](double x) {
      return std::min(bins - 1, static_cast<std::size_t>((x - lo) / width));
    };
    const std::size_t b = bin_of(t);
    std::size_t count = 0;
    for (double x : sample)
      if (bin_of(x) == b) ++count;
    return static_cast<double>(count) / (static_cast<double>(sample.size()) * width);
  }

  Kind kind_;
};

/// Growth rate r solving R0 * integral e^{-rt} g(t) dt = 1 (Euler-Lotka).
/// Negative when R0 < 1.
inline double euler_lotka_r(double r0, const GenerationTimeDist& g) {
  detail::require(r0 > 0.0 && std::isfinite(r0), "R0 must be finite and > 0");
  const double log_r0 = std::log(r0);
  // F(r) = log R0 + log L(r) is strictly decreasing in r.
  auto F = [&](double r) { return log_r0 + g.log_laplace(r); };
  if (log_r0 == 0.0) return 0.0;
  const double scale = 1.0 / g.mean();
  double lo, hi;
  if (log_r0 > 0.0) {
    lo = 0.0;
    hi = scale;
    while (F(hi) > 0.0) {
      lo = hi;
      hi *= 2.0;
      if (!std::isfinite(hi)) throw ConvergenceError("Euler-Lotka: no upper bracket", F(lo));
    }
  } else {
    hi = 0.0;
    const double bound = g.laplace_lower_bound();
    if (std::isfinite(bound)) {
      // L(r) -> infinity as r -> bound from above.
      double gap = -bound;
      lo = bound + 0.5 * gap;
      while (F(lo) < 0.0) {
        hi = lo;
        gap *= 0.5;
        lo = bound + 0.5 * gap;
        if (gap < 1e-300) throw ConvergenceError("Euler-Lotka: no lower bracket", F(hi));
      }
    } else {
      lo = -scale;
      while (F(lo) < 0.0) {
        hi = lo;
        lo *= 2.0;
        if (!std::isfinite(lo)) throw ConvergenceError("Euler-Lotka: no lower bracket", F(hi));
      }
    }
  }
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (F(mid) > 0.0 ? lo : hi) = mid;
  }
  const double r = std::abs(F(lo)) < std::abs(F(hi)) ? lo : hi;
  const double resid = std::abs(r0 * g.laplace(r) - 1.0);
  if (!(resid < 1e-10)) throw ConvergenceError("Euler-Lotka root not resolved", resid);
  return r;
}

/// R0 = 1 / integral e^{-rt} g(t) dt.
inline double r0_from_growth(double r, const GenerationTimeDist& g) {
  detail::require(std::isfinite(r), "growth rate must be finite");
  return std::exp(-g.log_laplace(r));
}

}  // namespace epistat
