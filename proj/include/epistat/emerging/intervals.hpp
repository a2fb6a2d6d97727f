#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "epistat/core/error.hpp"
#include "epistat/core/event_log.hpp"

namespace epistat {

/// Half-open calendar-time window [start, end).
struct TimeWindow {
  double start = 0.0;
  double end = 0.0;
  bool contains(double t) const { return t >= start && t < end; }
};

struct IntervalOptions {
  std::optional<TimeWindow> window;
  // Infection-to-onset delay per individual (size n); empty means no serial intervals.
  std::span<const double> onset_offsets;
};

struct IntervalSet {
  std::vector<double> forward;   // generation intervals, cohort of infectors
  std::vector<double> serial;    // onset-to-onset, cohort of infectors
  std::vector<double> backward;  // generation intervals, cohort of infectees
};

/// Window in which cumulative incidence lies between lo and hi fractions of n.
inline TimeWindow growth_phase_window(const EventLog& log, double lo = 0.01, double hi = 0.05) {
  detail::require(lo >= 0.0 && lo < hi && hi <= 1.0, "need 0 <= lo < hi <= 1");
  const double n = static_cast<double>(log.n);
  std::optional<double> start, end;
  long cumulative = 0;
  for (const Event& e : log.events) {
    if (e.kind != EventKind::infection) continue;
    ++cumulative;
    if (!start && static_cast<double>(cumulative) >= lo * n) start = e.time;
    if (!end && static_cast<double>(cumulative) >= hi * n) {
      end = e.time;
      break;
    }
  }
  if (!start || !end)
    throw DomainError("outbreak never reaches the growth-phase window (cumulative incidence < " +
                      std::to_string(hi) + " n)");
  return {*start, *end};
}

/// Forward generation intervals are collected for infectors infected inside the
/// window, backward intervals for infectees infected inside it. Without a
/// window every transmission pair counts for both.
inline IntervalSet extract_intervals(const EventLog& log, const IntervalOptions& opts = {}) {
  const bool serial = !opts.onset_offsets.empty();
  if (serial && opts.onset_offsets.size() != static_cast<std::size_t>(log.n))
    throw DomainError("onset offsets must have one entry per individual");
  const auto t_inf = infection_times(log);
  IntervalSet out;
  bool seen_index = false;
  for (const Event& e : log.events) {
    if (e.kind != EventKind::infection) continue;
    if (e.infector == no_infector) {
      if (seen_index) throw DataError("infection without infector attribution (subject " +
                                      std::to_string(e.subject) + ")");
      seen_index = true;
      continue;
    }
    const auto src = static_cast<std::size_t>(e.infector);
    const auto dst = static_cast<std::size_t>(e.subject);
    const double t_src = t_inf[src];
    if (std::isnan(t_src)) throw DataError("infector has no recorded infection");
    const double gen = e.time - t_src;
    if (!opts.window || opts.window->contains(t_src)) {
      out.forward.push_back(gen);
      if (serial) out.serial.push_back(gen + opts.onset_offsets[dst] - opts.onset_offsets[src]);
    }
    if (!opts.window || opts.window->contains(e.time)) out.backward.push_back(gen);
  }
  return out;
}

}  // namespace epistat
