#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <utility>
#include <vector>

#include "epistat/core/error.hpp"
#include "epistat/core/event_log.hpp"
#include "epistat/core/rng.hpp"

namespace epistat {

enum class InfectiousPeriod : std::uint8_t { exponential, fixed };

/// General stochastic epidemic: contact rate lambda per infective, recovery
/// rate gamma, closed population of n. A latent rate turns it into SEIR; a
/// fixed infectious period of exactly 1/gamma gives the continuous-time
/// Reed-Frost model.
struct GseParams {
  double lambda = 0.0;
  double gamma = 1.0;
  int n = 2;
  InfectiousPeriod infectious_period = InfectiousPeriod::exponential;
  std::optional<double> latent_rate;

  void validate() const {
    detail::require(lambda >= 0.0, "lambda must be >= 0");
    detail::require(gamma > 0.0, "gamma must be > 0");
    detail::require(n >= 2, "population size must be >= 2");
    detail::require(!latent_rate || *latent_rate > 0.0, "latent rate must be > 0");
  }

  double r0() const noexcept { return lambda / gamma; }
};

inline double reproduction_number(double lambda, double gamma) { return lambda / gamma; }
/// Reproduction number after a fraction v has been immunized.
inline double vaccinated_reproduction_number(double r0, double v) { return (1.0 - v) * r0; }
inline double critical_vaccination_coverage(double r0) { return r0 <= 1.0 ? 0.0 : 1.0 - 1.0 / r0; }

namespace detail {

// Unordered set of ids with O(1) insert, erase and uniform pick.
class IdPool {
 public:
  explicit IdPool(std::size_t capacity) : slot_(capacity, npos) { ids_.reserve(capacity); }

  void insert(int id) {
    slot_[static_cast<std::size_t>(id)] = ids_.size();
    ids_.push_back(id);
  }
  void erase(int id) {
    const std::size_t k = slot_[static_cast<std::size_t>(id)];
    const int last = ids_.back();
    ids_[k] = last;
    slot_[static_cast<std::size_t>(last)] = k;
    ids_.pop_back();
    slot_[static_cast<std::size_t>(id)] = npos;
  }
  int pick(Rng& rng) const { return ids_[rng.index(ids_.size())]; }
  int pick_at(std::size_t k) const { return ids_[k]; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<int> ids_;
  std::vector<std::size_t> slot_;
};

}  // namespace detail

/// Exact event-driven simulation of one outbreak from (n-1, 1, 0), index case
/// id 0 infected at time 0, run until no one is exposed or infectious.
inline EventLog simulate_gse(const GseParams& p, std::uint64_t seed) {
  p.validate();
  Rng rng(seed);
  const int n = p.n;
  const bool seir = p.latent_rate.has_value();
  const bool fixed = p.infectious_period == InfectiousPeriod::fixed;
  const double period = 1.0 / p.gamma;

  detail::IdPool susceptible(static_cast<std::size_t>(n));
  detail::IdPool exposed(static_cast<std::size_t>(n));
  detail::IdPool infectious(static_cast<std::size_t>(n));
  for (int id = 1; id < n; ++id) susceptible.insert(id);

  using Scheduled = std::pair<double, int>;
  std::priority_queue<Scheduled, std::vector<Scheduled>, std::greater<>> recoveries;

  EventLog log{n, {}, 0.0};
  log.events.reserve(static_cast<std::size_t>(seir ? 3 : 2) * 64);
  double t = 0.0;

  auto become_infectious = [&](int id) {
    infectious.insert(id);
    if (fixed) recoveries.emplace(t + period, id);
  };
  auto recover = [&](int id) {
    infectious.erase(id);
    log.events.push_back({t, EventKind::recovery, id, no_infector});
  };

  log.events.push_back({0.0, EventKind::infection, 0, no_infector});
  if (seir) log.events.push_back({0.0, EventKind::end_latency, 0, no_infector});
  become_infectious(0);

  const double contact_per_capita = p.lambda / static_cast<double>(n);
  while (!exposed.empty() || !infectious.empty()) {
    const double I = static_cast<double>(infectious.size());
    const double rate_infect = contact_per_capita * I * static_cast<double>(susceptible.size());
    const double rate_latent = seir ? *p.latent_rate * static_cast<double>(exposed.size()) : 0.0;
    const double rate_recover = fixed ? 0.0 : p.gamma * I;
    const double total = rate_infect + rate_latent + rate_recover;
    const double next_scheduled =
        recoveries.empty() ? std::numeric_limits<double>::infinity() : recoveries.top().first;
    const double dt = total > 0.0 ? rng.exponential(total) : std::numeric_limits<double>::infinity();

    if (t + dt >= next_scheduled) {
      t = next_scheduled;
      const int id = recoveries.top().second;
      recoveries.pop();
      recover(id);
      continue;
    }
    t += dt;
    const double u = rng.uniform() * total;
    if (u < rate_infect) {
      const int target = susceptible.pick(rng);
      const int source = infectious.pick(rng);
      susceptible.erase(target);
      log.events.push_back({t, EventKind::infection, target, source});
      if (seir) {
        exposed.insert(target);
      } else {
        become_infectious(target);
      }
    } else if (u < rate_infect + rate_latent) {
      const int id = exposed.pick(rng);
      exposed.erase(id);
      log.events.push_back({t, EventKind::end_latency, id, no_infector});
      become_infectious(id);
    } else {
      recover(infectious.pick(rng));
    }
  }
  log.end_time = t;
  return log;
}

/// Discrete-generation Reed-Frost chain binomial.
struct ReedFrostParams {
  int n = 2;
  double p = 0.0;
  int i0 = 1;

  void validate() const {
    detail::require(p >= 0.0 && p <= 1.0, "transmission probability must lie in [0, 1]");
    detail::require(i0 >= 1 && i0 < n, "initial infectives must satisfy 1 <= i0 < n");
  }
};

/// Infective counts per generation, starting with i0, until a generation is
/// empty (the empty generation is not included).
inline std::vector<int> simulate_reed_frost(const ReedFrostParams& p, std::uint64_t seed) {
  p.validate();
  Rng rng(seed);
  std::vector<int> generations{p.i0};
  long susceptible = p.n - p.i0;
  int current = p.i0;
  while (susceptible > 0) {
    const double escape = std::pow(1.0 - p.p, current);
    const long next = rng.binomial(susceptible, 1.0 - escape);
    if (next == 0) break;
    generations.push_back(static_cast<int>(next));
    susceptible -= next;
    current = static_cast<int>(next);
  }
  return generations;
}

inline int total_infected(const std::vector<int>& generations) {
  int total = 0;
  for (int g : generations) total += g;
  return total;
}

}  // namespace epistat
