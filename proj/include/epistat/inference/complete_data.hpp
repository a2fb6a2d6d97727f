#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "epistat/core/error.hpp"
#include "epistat/core/event_log.hpp"

namespace epistat {

/// Sufficient statistics of a fully observed SIR trajectory.
struct GseSufficientStats {
  int n = 0;
  long infections = 0;             // non-index infections
  double log_pressure = 0.0;       // sum over those of log(S(t-) I(t-) / n)
  double contact_integral = 0.0;   // integral of S I / n
  long recoveries = 0;
  double infectious_integral = 0.0;  // integral of I
  bool feasible = true;            // false when some infection happened with I(t-) = 0
};

struct CompleteDataLogLik {
  double value = 0.0;
  bool impossible = false;  // value is -inf
};

namespace detail {

// kind 0 = infection, 1 = recovery; index marks the initial case.
struct TimedEvent {
  double time;
  int kind;
  bool index;
};

inline GseSufficientStats accumulate_gse_stats(int n, std::vector<TimedEvent> events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const TimedEvent& a, const TimedEvent& b) { return a.time < b.time; });
  GseSufficientStats st;
  st.n = n;
  const double nd = static_cast<double>(n);
  long S = n;
  long I = 0;
  double t = events.empty() ? 0.0 : events.front().time;
  for (const auto& e : events) {
    const double dt = e.time - t;
    st.contact_integral += static_cast<double>(S) * static_cast<double>(I) / nd * dt;
    st.infectious_integral += static_cast<double>(I) * dt;
    t = e.time;
    if (e.kind == 0) {
      if (!e.index) {
        if (I == 0 || S == 0) st.feasible = false;
        else st.log_pressure += std::log(static_cast<double>(S) * static_cast<double>(I) / nd);
        ++st.infections;
      }
      --S;
      ++I;
    } else {
      if (I == 0) st.feasible = false;
      --I;
      ++st.recoveries;
    }
  }
  return st;
}

}  // namespace detail

/// Statistics from a complete SIR event log.
inline GseSufficientStats gse_sufficient_stats(const EventLog& log) {
  validate(log);
  std::vector<detail::TimedEvent> ev;
  ev.reserve(log.events.size());
  for (const auto& e : log.events) {
    detail::require(e.kind != EventKind::end_latency,
                    "complete-data likelihood is defined for SIR logs only");
    ev.push_back({e.time, e.kind == EventKind::infection ? 0 : 1,
                  e.kind == EventKind::infection && e.infector == no_infector});
  }
  (void)final_size(log);  // rejects logs with pending recoveries
  return detail::accumulate_gse_stats(log.n, std::move(ev));
}

/// Statistics from per-individual infection and removal times; entry `index`
/// is the initial case. Infeasible orderings are flagged, not thrown.
inline GseSufficientStats gse_sufficient_stats(int n, std::span<const double> infection_times,
                                               std::span<const double> removal_times,
                                               std::size_t index) {
  detail::require(infection_times.size() == removal_times.size(),
                  "one infection time per removal time");
  detail::require(index < infection_times.size(), "index case out of range");
  detail::require(static_cast<long>(infection_times.size()) <= n, "more infected than population");
  std::vector<detail::TimedEvent> ev;
  ev.reserve(2 * infection_times.size());
  GseSufficientStats bad;
  bad.n = n;
  bad.feasible = false;
  for (std::size_t j = 0; j < infection_times.size(); ++j) {
    if (!(infection_times[j] < removal_times[j])) return bad;
    if (j != index && !(infection_times[j] > infection_times[index])) return bad;
    ev.push_back({infection_times[j], 0, j == index});
    ev.push_back({removal_times[j], 1, false});
  }
  return detail::accumulate_gse_stats(n, std::move(ev));
}

/// K log lambda + sum log(S I / n) - lambda A + R log gamma - gamma B.
inline CompleteDataLogLik complete_data_loglik(const GseSufficientStats& st, double lambda,
                                               double gamma) {
  detail::require(lambda >= 0.0 && gamma >= 0.0, "rates must be >= 0");
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  if (!st.feasible) return {ninf, true};
  if ((st.infections > 0 && lambda == 0.0) || (st.recoveries > 0 && gamma == 0.0))
    return {ninf, true};
  double v = 0.0;
  if (st.infections > 0) v += static_cast<double>(st.infections) * std::log(lambda) + st.log_pressure;
  v -= lambda * st.contact_integral;
  if (st.recoveries > 0) v += static_cast<double>(st.recoveries) * std::log(gamma);
  v -= gamma * st.infectious_integral;
  return {v, false};
}

inline CompleteDataLogLik complete_data_loglik(const EventLog& log, double lambda, double gamma) {
  return complete_data_loglik(gse_sufficient_stats(log), lambda, gamma);
}

/// Closed-form complete-data MLE (lambda, gamma).
inline std::pair<double, double> complete_data_mle(const GseSufficientStats& st) {
  detail::require(st.feasible, "infeasible trajectory");
  detail::require(st.contact_integral > 0.0 && st.infectious_integral > 0.0,
                  "MLE needs positive exposure");
  return {static_cast<double>(st.infections) / st.contact_integral,
          static_cast<double>(st.recoveries) / st.infectious_integral};
}

}  // namespace epistat
