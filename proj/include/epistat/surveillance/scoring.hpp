#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "epistat/core/error.hpp"
#include "epistat/core/rng.hpp"
#include "epistat/surveillance/negbin.hpp"

namespace epistat {

struct PoissonPredictive {
  double mean = 1.0;
};

struct DegeneratePredictive {
  long value = 0;
};

/// Count predictive distribution.
using Predictive = std::variant<PoissonPredictive, NegBin, DegeneratePredictive>;

inline double log_pmf(const Predictive& p, long y) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  return std::visit(
      [y](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, PoissonPredictive>) {
          if (y < 0) return ninf;
          if (d.mean == 0.0) return y == 0 ? 0.0 : ninf;
          return NegBin{d.mean, 0.0}.log_pmf(y);
        } else if constexpr (std::is_same_v<T, NegBin>) {
          return d.log_pmf(y);
        } else {
          return y == d.value ? 0.0 : ninf;
        }
      },
      p);
}

inline double cdf(const Predictive& p, long y) {
  return std::visit(
      [y](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, PoissonPredictive>) {
          if (y < 0) return 0.0;
          return d.mean == 0.0 ? 1.0 : NegBin{d.mean, 0.0}.cdf(y);
        } else if constexpr (std::is_same_v<T, NegBin>) {
          return d.cdf(y);
        } else {
          return y >= d.value ? 1.0 : 0.0;
        }
      },
      p);
}

struct Score {
  double value = 0.0;
  bool zero_mass = false;  // the observation had zero predicted probability; value is +inf
};

/// Logarithmic score -log P(Y = y); lower is better.
inline Score log_score(const Predictive& p, long y) {
  const double lp = log_pmf(p, y);
  if (lp == -std::numeric_limits<double>::infinity())
    return {std::numeric_limits<double>::infinity(), true};
  return {-lp, false};
}

/// Mean log score over paired predictives and observations.
inline Score mean_log_score(std::span<const Predictive> preds, std::span<const long> ys) {
  detail::require(preds.size() == ys.size(), "one observation per predictive");
  detail::require(!preds.empty(), "nothing to score");
  Score total;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const auto s = log_score(preds[k], ys[k]);
    total.value += s.value;
    total.zero_mass = total.zero_mass || s.zero_mass;
  }
  total.value /= static_cast<double>(preds.size());
  return total;
}

/// Randomized probability integral transform F(y-1) + V (F(y) - F(y-1)),
/// uniform on (0, 1) when y is drawn from the predictive.
inline double randomized_pit(const Predictive& p, long y, Rng& rng) {
  const double lo = cdf(p, y - 1);
  const double hi = cdf(p, y);
  return lo + rng.uniform() * (hi - lo);
}

}  // namespace epistat
