#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "epistat/core/error.hpp"
#include "epistat/core/event_log.hpp"
#include "epistat/core/replicate.hpp"
#include "epistat/core/rng.hpp"
#include "epistat/inference/posterior.hpp"
#include "epistat/inference/prior.hpp"

namespace epistat {

/// Thrown when no prior draw falls within epsilon of the observed summaries.
class EmptyPosteriorError : public DomainError {
 public:
  using DomainError::DomainError;
};

enum class EpidemicSummary { final_size, duration, peak_incidence, peak_time };

inline std::string to_string(EpidemicSummary s) {
  switch (s) {
    case EpidemicSummary::final_size: return "final_size";
    case EpidemicSummary::duration: return "duration";
    case EpidemicSummary::peak_incidence: return "peak_incidence";
    case EpidemicSummary::peak_time: return "peak_time";
  }
  return "?";
}

inline EpidemicSummary parse_epidemic_summary(const std::string& s) {
  for (auto k : {EpidemicSummary::final_size, EpidemicSummary::duration,
                 EpidemicSummary::peak_incidence, EpidemicSummary::peak_time})
    if (to_string(k) == s) return k;
  throw DomainError("unknown summary '" + s + "'");
}

/// Summaries of one outbreak. Incidence counts infections in bins of
/// `bin_width` starting at 0; peak time is the start of the first fullest bin.
inline std::vector<double> epidemic_summaries(const EventLog& log,
                                              const std::vector<EpidemicSummary>& which,
                                              double bin_width = 1.0) {
  detail::require(bin_width > 0.0, "bin width must be > 0");
  std::vector<long> bins;
  long z = 0;
  for (const auto& e : log.events) {
    if (e.kind != EventKind::infection) continue;
    ++z;
    const auto b = static_cast<std::size_t>(std::floor(e.time / bin_width));
    if (bins.size() <= b) bins.resize(b + 1, 0);
    ++bins[b];
  }
  std::size_t peak = 0;
  for (std::size_t b = 1; b < bins.size(); ++b)
    if (bins[b] > bins[peak]) peak = b;
  std::vector<double> out;
  out.reserve(which.size());
  for (auto s : which) {
    switch (s) {
      case EpidemicSummary::final_size: out.push_back(static_cast<double>(z)); break;
      case EpidemicSummary::duration: out.push_back(log.end_time); break;
      case EpidemicSummary::peak_incidence:
        out.push_back(bins.empty() ? 0.0 : static_cast<double>(bins[peak]));
        break;
      case EpidemicSummary::peak_time: out.push_back(static_cast<double>(peak) * bin_width); break;
    }
  }
  return out;
}

struct AbcConfig {
  std::vector<EpidemicSummary> summaries{EpidemicSummary::final_size};
  double epsilon = 0.0;          // may be +inf
  std::size_t draws = 1000;
  std::size_t pilot_draws = 200;  // prior-predictive runs used to scale summaries
  bool standardize = true;
  unsigned threads = 0;

  void validate() const {
    detail::require(draws >= 1, "ABC needs at least one draw");
    detail::require(!summaries.empty(), "ABC needs at least one summary");
    detail::require(epsilon >= 0.0, "epsilon must be >= 0");
  }
};

struct AbcResult {
  PosteriorSample sample;
  std::vector<double> distances;  // of the accepted draws
  std::vector<double> scale;      // per-summary divisor
};

namespace detail {
inline constexpr std::uint64_t abc_pilot_salt = 0x5A17'0000'0000'0001ULL;
}

/// Rejection ABC. `simulate(theta, rng)` returns a summary vector of the same
/// length as `observed`. Draw i uses its own stream, so the result does not
/// depend on the thread count.
template <class Simulator>
AbcResult abc_rejection(Simulator&& simulate, const std::vector<double>& observed,
                        const PriorSpec& prior, const AbcConfig& cfg, std::uint64_t seed) {
  prior.validate();
  detail::require(cfg.draws >= 1, "ABC needs at least one draw");
  detail::require(cfg.epsilon >= 0.0, "epsilon must be >= 0");
  detail::require(!observed.empty(), "observed summaries are empty");
  const std::size_t k = observed.size();

  auto run = [&](std::uint64_t master, std::size_t i, std::vector<double>& theta) {
    Rng rng = Rng::stream(master, i);
    theta = prior.sample(rng);
    auto s = simulate(theta, rng);
    if (s.size() != k) throw DomainError("simulator returned summaries of the wrong length");
    return s;
  };

  AbcResult out;
  out.scale.assign(k, 1.0);
  if (cfg.standardize && cfg.pilot_draws >= 2) {
    std::vector<std::vector<double>> pilot(cfg.pilot_draws);
    const std::uint64_t pilot_seed = seed ^ detail::abc_pilot_salt;
    detail::parallel_for(cfg.pilot_draws, cfg.threads, [&](std::size_t i, unsigned) {
      std::vector<double> theta;
      pilot[i] = run(pilot_seed, i, theta);
    });
    for (std::size_t j = 0; j < k; ++j) {
      double mean = 0.0;
      for (const auto& p : pilot) mean += p[j];
      mean /= static_cast<double>(pilot.size());
      double ss = 0.0;
      for (const auto& p : pilot) ss += (p[j] - mean) * (p[j] - mean);
      const double sd = std::sqrt(ss / static_cast<double>(pilot.size() - 1));
      out.scale[j] = sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
    }
  }

  std::vector<std::vector<double>> thetas(cfg.draws);
  std::vector<double> dist(cfg.draws);
  detail::parallel_for(cfg.draws, cfg.threads, [&](std::size_t i, unsigned) {
    const auto s = run(seed, i, thetas[i]);
    double d2 = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double z = (s[j] - observed[j]) / out.scale[j];
      d2 += z * z;
    }
    dist[i] = std::sqrt(d2);
  });

  out.sample.names = prior.names;
  out.sample.proposals = cfg.draws;
  for (std::size_t i = 0; i < cfg.draws; ++i) {
    if (std::isinf(cfg.epsilon) || dist[i] <= cfg.epsilon) {
      out.sample.draws.push_back(std::move(thetas[i]));
      out.distances.push_back(dist[i]);
    }
  }
  if (out.sample.draws.empty())
    throw EmptyPosteriorError("ABC accepted none of " + std::to_string(cfg.draws) +
                              " draws; try a larger epsilon");
  out.sample.acceptance_rate =
      static_cast<double>(out.sample.draws.size()) / static_cast<double>(cfg.draws);
  for (std::size_t j = 0; j < prior.size(); ++j)
    out.sample.ess.push_back(effective_sample_size(out.sample.column(j)).ess);
  return out;
}

}  // namespace epistat
