#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "epistat/core/error.hpp"

namespace epistat {

enum class EventKind : std::uint8_t { infection, end_latency, recovery };

inline constexpr int no_infector = -1;

inline std::string_view to_string(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::infection: return "infection";
    case EventKind::end_latency: return "end-latency";
    case EventKind::recovery: return "recovery";
  }
  return "?";
}

inline EventKind parse_event_kind(std::string_view s) {
  if (s == "infection") return EventKind::infection;
  if (s == "end-latency") return EventKind::end_latency;
  if (s == "recovery") return EventKind::recovery;
  throw DataError("unknown event kind '" + std::string(s) + "'");
}

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::infection;
  int subject = 0;
  int infector = no_infector;  // set only on infection events; none for the index case

  friend bool operator==(const Event&, const Event&) = default;
};

/// Time-ordered outbreak record. Individuals are 0..n-1; S+E+I+R = n.
struct EventLog {
  int n = 0;
  std::vector<Event> events;
  double end_time = 0.0;

  friend bool operator==(const EventLog&, const EventLog&) = default;
};

/// Compartment counts immediately after an event (or at time 0 before any event).
struct CompartmentState {
  double time = 0.0;
  int S = 0;
  int E = 0;
  int I = 0;
  int R = 0;
};

namespace detail {

enum class Status : std::uint8_t { susceptible, exposed, infectious, recovered };

struct Replay {
  std::vector<CompartmentState> path;
  std::vector<Status> status;
};

// Replays a log, enforcing every structural invariant. A log without any
// end-latency event is SIR: infection makes the subject infectious at once.
// `require_complete` also rejects logs where someone is still exposed or
// infectious.
inline Replay replay_checked(const EventLog& log, bool require_complete) {
  if (log.n < 1) throw DataError("event log: population size must be positive");
  Replay out;
  out.status.assign(static_cast<std::size_t>(log.n), Status::susceptible);
  const bool sir = std::none_of(log.events.begin(), log.events.end(),
                                [](const Event& e) { return e.kind == EventKind::end_latency; });
  CompartmentState st{0.0, log.n, 0, 0, 0};
  out.path.reserve(log.events.size() + 1);
  out.path.push_back(st);
  std::vector<double> infected_at(static_cast<std::size_t>(log.n), 0.0);
  double last = 0.0;
  bool seen_index = false;
  for (std::size_t k = 0; k < log.events.size(); ++k) {
    const Event& e = log.events[k];
    const std::string where = "event " + std::to_string(k + 1) + ": ";
    if (!(e.time >= last)) throw DataError(where + "times must be nondecreasing and nonnegative");
    last = e.time;
    if (e.subject < 0 || e.subject >= log.n) throw DataError(where + "subject out of range");
    auto& s = out.status[static_cast<std::size_t>(e.subject)];
    switch (e.kind) {
      case EventKind::infection: {
        if (s != Status::susceptible) throw DataError(where + "subject infected twice");
        if (e.infector == no_infector) {
          if (seen_index) throw DataError(where + "second infection without infector");
          seen_index = true;
        } else {
          if (e.infector < 0 || e.infector >= log.n)
            throw DataError(where + "infector out of range");
          if (out.status[static_cast<std::size_t>(e.infector)] != Status::infectious)
            throw DataError(where + "infector not infectious at infection time");
        }
        infected_at[static_cast<std::size_t>(e.subject)] = e.time;
        --st.S;
        if (sir) {
          s = Status::infectious;
          ++st.I;
        } else {
          s = Status::exposed;
          ++st.E;
        }
        break;
      }
      case EventKind::end_latency:
        if (s != Status::exposed) throw DataError(where + "end of latency for non-exposed subject");
        s = Status::infectious;
        --st.E;
        ++st.I;
        break;
      case EventKind::recovery:
        if (s != Status::infectious) throw DataError(where + "recovery of non-infectious subject");
        if (!(e.time > infected_at[static_cast<std::size_t>(e.subject)]))
          throw DataError(where + "recovery not after infection");
        s = Status::recovered;
        --st.I;
        ++st.R;
        break;
    }
    st.time = e.time;
    out.path.push_back(st);
  }
  if (require_complete && (st.E != 0 || st.I != 0))
    throw DomainError("incomplete event log: " + std::to_string(st.E + st.I) +
                      " individual(s) never recover");
  return out;
}

}  // namespace detail

/// Counts after every event. SIR logs (no end-latency events) report E = 0.
inline std::vector<CompartmentState> compartment_path(const EventLog& log) {
  return detail::replay_checked(log, false).path;
}

/// Throws DataError describing the first violated invariant.
inline void validate(const EventLog& log) {
  detail::replay_checked(log, false);
}

/// State at time t (right-continuous). `path` must come from compartment_path.
inline CompartmentState state_at(const std::vector<CompartmentState>& path, double t) {
  auto it = std::upper_bound(path.begin(), path.end(), t,
                             [](double x, const CompartmentState& s) { return x < s.time; });
  if (it == path.begin()) return path.front();
  CompartmentState st = *std::prev(it);
  st.time = t;
  return st;
}

/// Number of ever-infected individuals, index case included. Rejects logs in
/// which some infective never recovers.
inline int final_size(const EventLog& log) {
  auto r = detail::replay_checked(log, true);
  return r.path.back().R;
}

/// Infection time per individual (NaN if never infected).
inline std::vector<double> infection_times(const EventLog& log) {
  std::vector<double> t(static_cast<std::size_t>(log.n), std::numeric_limits<double>::quiet_NaN());
  for (const Event& e : log.events)
    if (e.kind == EventKind::infection) t[static_cast<std::size_t>(e.subject)] = e.time;
  return t;
}

}  // namespace epistat
