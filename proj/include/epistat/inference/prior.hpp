#pragma once

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "epistat/core/error.hpp"
#include "epistat/core/rng.hpp"

namespace epistat {

struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
};

struct UniformPrior {
  double lo = 0.0;
  double hi = 1.0;
};

using PriorDist = std::variant<GammaPrior, UniformPrior>;

inline void validate(const PriorDist& d) {
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GammaPrior>)
          detail::require(p.shape > 0.0 && p.rate > 0.0, "gamma prior needs shape, rate > 0");
        else
          detail::require(p.lo < p.hi && std::isfinite(p.lo) && std::isfinite(p.hi),
                          "uniform prior needs finite lo < hi");
      },
      d);
}

inline double sample(const PriorDist& d, Rng& rng) {
  return std::visit(
      [&rng](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GammaPrior>) return rng.gamma(p.shape, p.rate);
        else return rng.uniform(p.lo, p.hi);
      },
      d);
}

inline double log_density(const PriorDist& d, double x) {
  return std::visit(
      [x](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GammaPrior>) {
          if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
          return p.shape * std::log(p.rate) - std::lgamma(p.shape) + (p.shape - 1.0) * std::log(x) -
                 p.rate * x;
        } else {
          if (x < p.lo || x > p.hi) return -std::numeric_limits<double>::infinity();
          return -std::log(p.hi - p.lo);
        }
      },
      d);
}

inline double cdf(const PriorDist& d, double x) {
  return std::visit(
      [x](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GammaPrior>)
          return x <= 0.0 ? 0.0 : boost::math::gamma_p(p.shape, p.rate * x);
        else
          return x <= p.lo ? 0.0 : x >= p.hi ? 1.0 : (x - p.lo) / (p.hi - p.lo);
      },
      d);
}

/// Independent per-parameter priors.
struct PriorSpec {
  std::vector<std::string> names;
  std::vector<PriorDist> dists;

  std::size_t size() const { return dists.size(); }

  void validate() const {
    detail::require(!dists.empty(), "prior needs at least one parameter");
    detail::require(names.size() == dists.size(), "one name per prior component");
    for (const auto& d : dists) epistat::validate(d);
  }

  std::vector<double> sample(Rng& rng) const {
    std::vector<double> theta(dists.size());
    for (std::size_t i = 0; i < dists.size(); ++i) theta[i] = epistat::sample(dists[i], rng);
    return theta;
  }

  double log_density(const std::vector<double>& theta) const {
    double lp = 0.0;
    for (std::size_t i = 0; i < dists.size(); ++i) lp += epistat::log_density(dists[i], theta[i]);
    return lp;
  }
};

}  // namespace epistat
