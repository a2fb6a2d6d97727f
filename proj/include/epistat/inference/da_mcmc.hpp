#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "epistat/core/error.hpp"
#include "epistat/core/rng.hpp"
#include "epistat/inference/complete_data.hpp"
#include "epistat/inference/posterior.hpp"
#include "epistat/inference/prior.hpp"

namespace epistat {

/// Observed data: removal times of every infected individual. Entry `index`
/// is the initial case, taken to be infected at time 0.
struct RemovalData {
  int n = 0;
  std::vector<double> removal_times;
  std::size_t index = 0;

  void validate() const {
    detail::require(!removal_times.empty(), "need at least one removal time");
    detail::require(static_cast<long>(removal_times.size()) <= n,
                    "more removals than population");
    detail::require(index < removal_times.size(), "index case out of range");
    for (double r : removal_times)
      detail::require(std::isfinite(r) && r > 0.0, "removal times must be finite and > 0");
  }
};

struct DaMcmcConfig {
  std::size_t iterations = 10000;
  double burn_in_fraction = 0.2;
  std::size_t thin = 1;
  bool update_infection_times = true;
  std::size_t infection_updates_per_iteration = 1;
  std::optional<std::vector<double>> initial_infection_times;
  bool keep_latent = false;
  double rw_scale = 0.1;  // random-walk sd as a fraction of a uniform prior's width
};

namespace detail {

// Every non-index case infected before the first removal, spaced in order;
// the index case is infectious throughout, so this is always feasible.
inline std::vector<double> default_infection_times(const RemovalData& d) {
  const double first = *std::min_element(d.removal_times.begin(), d.removal_times.end());
  std::vector<double> t(d.removal_times.size(), 0.0);
  const double z = static_cast<double>(t.size());
  std::size_t rank = 1;
  for (std::size_t j = 0; j < t.size(); ++j)
    if (j != d.index) t[j] = 0.5 * first * static_cast<double>(rank++) / z;
  return t;
}

// One update of a rate whose complete-data likelihood is rate^count exp(-rate * exposure).
inline double update_rate(const PriorDist& prior, double current, long count, double exposure,
                          double rw_scale, Rng& rng, std::size_t& accepted, std::size_t& proposed) {
  if (const auto* g = std::get_if<GammaPrior>(&prior))
    return rng.gamma(g->shape + static_cast<double>(count), g->rate + exposure);
  const auto& u = std::get<UniformPrior>(prior);
  ++proposed;
  const double cand = current + rng.normal() * rw_scale * (u.hi - u.lo);
  if (cand < u.lo || cand > u.hi || !(cand > 0.0)) return current;
  auto logl = [&](double x) { return static_cast<double>(count) * std::log(x) - x * exposure; };
  if (std::log(rng.uniform_open()) < logl(cand) - logl(current)) {
    ++accepted;
    return cand;
  }
  return current;
}

}  // namespace detail

/// Metropolis-within-Gibbs over (lambda, gamma, infection times) for the
/// general stochastic epidemic observed through its removal times. Priors are
/// given for (lambda, gamma) in that order.
inline PosteriorSample da_mcmc_gse(const RemovalData& data, const PriorSpec& prior,
                                   const DaMcmcConfig& cfg, std::uint64_t seed) {
  data.validate();
  prior.validate();
  detail::require(prior.size() == 2, "prior must cover (lambda, gamma)");
  detail::require(cfg.iterations >= 1, "need at least one iteration");
  detail::require(cfg.burn_in_fraction >= 0.0 && cfg.burn_in_fraction < 1.0,
                  "burn-in fraction must lie in [0, 1)");
  detail::require(cfg.thin >= 1, "thinning must be >= 1");
  detail::require(cfg.rw_scale > 0.0, "random-walk scale must be > 0");

  Rng rng(seed);
  const auto& r = data.removal_times;
  const std::size_t z = r.size();
  std::vector<double> t = cfg.initial_infection_times.value_or(detail::default_infection_times(data));
  detail::require(t.size() == z, "one initial infection time per removal");
  t[data.index] = 0.0;
  GseSufficientStats st = gse_sufficient_stats(data.n, t, r, data.index);
  if (!st.feasible) throw DomainError("initial infection times give an impossible trajectory");

  double lambda = 0.0;
  double gamma = 0.0;
  {
    // Start at the conditional mean under gamma priors, mid-support otherwise.
    auto start = [](const PriorDist& p, long count, double exposure) {
      if (const auto* g = std::get_if<GammaPrior>(&p))
        return (g->shape + static_cast<double>(count)) / (g->rate + exposure);
      const auto& u = std::get<UniformPrior>(p);
      return 0.5 * (u.lo + u.hi);
    };
    lambda = start(prior.dists[0], st.infections, st.contact_integral);
    gamma = start(prior.dists[1], st.recoveries, st.infectious_integral);
  }

  PosteriorSample out;
  out.names = prior.names;
  const auto burn = static_cast<std::size_t>(cfg.burn_in_fraction * static_cast<double>(cfg.iterations));
  std::size_t rate_acc = 0, rate_prop = 0, time_acc = 0, time_prop = 0;
  const bool move_times = cfg.update_infection_times && z > 1;

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    lambda = detail::update_rate(prior.dists[0], lambda, st.infections, st.contact_integral,
                                 cfg.rw_scale, rng, rate_acc, rate_prop);
    gamma = detail::update_rate(prior.dists[1], gamma, st.recoveries, st.infectious_integral,
                                cfg.rw_scale, rng, rate_acc, rate_prop);
    if (move_times) {
      double cur = complete_data_loglik(st, lambda, gamma).value;
      for (std::size_t u = 0; u < cfg.infection_updates_per_iteration; ++u) {
        std::size_t j = rng.index(z - 1);
        if (j >= data.index) ++j;
        const double old = t[j];
        t[j] = rng.uniform_open() * r[j];
        ++time_prop;
        const GseSufficientStats cand = gse_sufficient_stats(data.n, t, r, data.index);
        if (!cand.feasible) {
          ++out.infeasible;
          t[j] = old;
          continue;
        }
        const auto ll = complete_data_loglik(cand, lambda, gamma);
        if (!ll.impossible && std::log(rng.uniform_open()) < ll.value - cur) {
          st = cand;
          cur = ll.value;
          ++time_acc;
        } else {
          t[j] = old;
        }
      }
    }
    if (it >= burn && (it - burn) % cfg.thin == 0) {
      out.draws.push_back({lambda, gamma});
      if (cfg.keep_latent) out.latent.push_back(t);
    }
  }

  out.proposals = time_prop + rate_prop;
  const std::size_t acc = time_acc + rate_acc;
  out.acceptance_rate = out.proposals > 0
                            ? static_cast<double>(acc) / static_cast<double>(out.proposals)
                            : 1.0;
  if (out.draws.empty()) throw DomainError("no draws retained after burn-in and thinning");
  for (std::size_t j = 0; j < 2; ++j)
    out.ess.push_back(effective_sample_size(out.column(j)).ess);
  return out;
}

}  // namespace epistat
