#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "epistat/core/error.hpp"
#include "epistat/core/event_log.hpp"
#include "epistat/emerging/growth.hpp"
#include "epistat/emerging/intervals.hpp"
#include "epistat/final_size/estimators.hpp"
#include "epistat/inference/da_mcmc.hpp"
#include "epistat/inference/posterior.hpp"
#include "epistat/io/csv.hpp"
#include "epistat/structured/household.hpp"
#include "epistat/structured/patches.hpp"
#include "epistat/surveillance/endemic_epidemic.hpp"
#include "epistat/surveillance/farrington.hpp"

namespace epistat::io {

enum class Schema {
  event_log,         // time,kind,subject,infector
  household,         // household_id,event,time
  household_sizes,   // household_id,size
  patch_trajectory,  // t,S1,I1,R1,S2,I2,R2
  panel,             // unit,week,year,count
  weights,           // from,to,weight
  detector,          // s,y_s,mu_s,g_s,alarm
  posterior,         // draw,param1,param2,...
  intervals,         // kind,value
  estimates,         // parameter,point,se,formula_id
  incidence,         // period,count
  removals,          // subject,removal_time,index
};

inline const std::map<std::string, Schema>& schema_names() {
  static const std::map<std::string, Schema> names{
      {"event-log", Schema::event_log},   {"household", Schema::household},
      {"household-sizes", Schema::household_sizes},
      {"patch-trajectory", Schema::patch_trajectory},
      {"panel", Schema::panel},           {"weights", Schema::weights},
      {"detector", Schema::detector},     {"posterior", Schema::posterior},
      {"intervals", Schema::intervals},   {"estimates", Schema::estimates},
      {"incidence", Schema::incidence},   {"removals", Schema::removals},
  };
  return names;
}

inline Schema parse_schema(const std::string& s) {
  const auto it = schema_names().find(s);
  if (it == schema_names().end()) throw DomainError("unknown schema '" + s + "'");
  return it->second;
}

// ---- row types without a natural home elsewhere ----

struct WeightEntry {
  std::string from;
  std::string to;
  double weight = 0.0;
  friend bool operator==(const WeightEntry&, const WeightEntry&) = default;
};

struct WeightList {
  std::vector<WeightEntry> entries;
  friend bool operator==(const WeightList&, const WeightList&) = default;
};

/// One detector output line; the optional fields are empty for weeks that
/// could not be assessed.
struct DetectorRow {
  std::size_t s = 0;
  long y_s = 0;
  std::optional<double> mu_s;
  std::optional<long> g_s;
  std::optional<bool> alarm;
  friend bool operator==(const DetectorRow&, const DetectorRow&) = default;
};

struct DetectorTable {
  std::vector<DetectorRow> rows;
  friend bool operator==(const DetectorTable&, const DetectorTable&) = default;
};

inline DetectorTable to_detector_table(const DetectorResult& r) {
  DetectorTable t;
  for (const auto& w : r.weeks) {
    DetectorRow row{w.s, w.y_s, std::nullopt, std::nullopt, std::nullopt};
    if (w.assessable()) {
      row.mu_s = w.mu_s;
      row.g_s = w.g_s;
      row.alarm = w.alarm;
    }
    t.rows.push_back(row);
  }
  return t;
}

struct NamedEstimate {
  std::string parameter;
  Estimate estimate;
};

struct EstimateTable {
  std::vector<NamedEstimate> rows;
};

inline bool operator==(const EstimateTable& a, const EstimateTable& b) {
  if (a.rows.size() != b.rows.size()) return false;
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    const auto& x = a.rows[k];
    const auto& y = b.rows[k];
    if (x.parameter != y.parameter || x.estimate.point != y.estimate.point ||
        x.estimate.se != y.estimate.se || x.estimate.formula_id != y.estimate.formula_id)
      return false;
  }
  return true;
}

struct HouseholdRecords {
  std::vector<HouseholdRecord> records;
  friend bool operator==(const HouseholdRecords&, const HouseholdRecords&) = default;
};

struct HouseholdSizes {
  std::vector<int> sizes;  // indexed by household id
  friend bool operator==(const HouseholdSizes&, const HouseholdSizes&) = default;
};

struct PatchTrajectory {
  std::vector<PatchState> states;
};

inline bool operator==(const PatchTrajectory& a, const PatchTrajectory& b) {
  auto key = [](const PatchState& s) { return std::tuple(s.t, s.S1, s.I1, s.R1, s.S2, s.I2, s.R2); };
  return a.states.size() == b.states.size() &&
         std::equal(a.states.begin(), a.states.end(), b.states.begin(),
                    [&](const PatchState& x, const PatchState& y) { return key(x) == key(y); });
}

/// Removal times keyed by subject id.
struct RemovalTable {
  std::vector<int> subjects;
  RemovalData data;
};

inline bool operator==(const RemovalTable& a, const RemovalTable& b) {
  return a.subjects == b.subjects && a.data.n == b.data.n &&
         a.data.removal_times == b.data.removal_times && a.data.index == b.data.index;
}

struct IngestOptions {
  std::optional<int> n;  // population size for event logs and removal tables
};

// ---- writers ----

inline std::string to_csv(const EventLog& log) {
  std::ostringstream os;
  os << "time,kind,subject,infector\n";
  for (const auto& e : log.events) {
    os << format_number(e.time) << ',' << to_string(e.kind) << ',' << e.subject << ',';
    if (e.infector != no_infector) os << e.infector;
    os << '\n';
  }
  return os.str();
}

inline std::string household_record_kind(HouseholdRecord::Kind k) {
  switch (k) {
    case HouseholdRecord::Kind::index: return "index";
    case HouseholdRecord::Kind::infection: return "infection";
    case HouseholdRecord::Kind::recovery: return "recovery";
  }
  return "?";
}

inline std::string to_csv(const HouseholdRecords& h) {
  std::ostringstream os;
  os << "household_id,event,time\n";
  for (const auto& r : h.records)
    os << r.household << ',' << household_record_kind(r.kind) << ',' << format_number(r.time) << '\n';
  return os.str();
}

inline std::string to_csv(const HouseholdSizes& h) {
  std::ostringstream os;
  os << "household_id,size\n";
  for (std::size_t k = 0; k < h.sizes.size(); ++k) os << k << ',' << h.sizes[k] << '\n';
  return os.str();
}

inline std::string to_csv(const PatchTrajectory& p) {
  std::ostringstream os;
  os << "t,S1,I1,R1,S2,I2,R2\n";
  for (const auto& s : p.states)
    os << format_number(s.t) << ',' << format_number(s.S1) << ',' << format_number(s.I1) << ','
       << format_number(s.R1) << ',' << format_number(s.S2) << ',' << format_number(s.I2) << ','
       << format_number(s.R2) << '\n';
  return os.str();
}

inline std::string panel_label(const CountPanel& p, std::size_t i) {
  return p.labels.empty() ? std::to_string(i + 1) : p.labels[i];
}

inline std::string to_csv(const CountPanel& p) {
  std::ostringstream os;
  os << "unit,week,year,count\n";
  for (std::size_t i = 0; i < p.units(); ++i)
    for (std::size_t t = 0; t < p.periods(); ++t) {
      const int week = p.week.empty() ? static_cast<int>(t % 52) + 1 : p.week[t];
      const int year = p.year.empty() ? static_cast<int>(t / 52) + 1 : p.year[t];
      os << panel_label(p, i) << ',' << week << ',' << year << ',' << p.y[i][t] << '\n';
    }
  return os.str();
}

inline std::string to_csv(const WeightList& w) {
  std::ostringstream os;
  os << "from,to,weight\n";
  for (const auto& e : w.entries) os << e.from << ',' << e.to << ',' << format_number(e.weight) << '\n';
  return os.str();
}

inline std::string to_csv(const DetectorTable& d) {
  std::ostringstream os;
  os << "s,y_s,mu_s,g_s,alarm\n";
  for (const auto& r : d.rows) {
    os << r.s << ',' << r.y_s << ',';
    if (r.mu_s) os << format_number(*r.mu_s);
    os << ',';
    if (r.g_s) os << *r.g_s;
    os << ',';
    if (r.alarm) os << (*r.alarm ? 1 : 0);
    os << '\n';
  }
  return os.str();
}

inline std::string to_csv(const PosteriorSample& s) {
  std::ostringstream os;
  os << "draw";
  for (const auto& n : s.names) os << ',' << n;
  os << '\n';
  for (std::size_t k = 0; k < s.draws.size(); ++k) {
    os << k + 1;
    for (double v : s.draws[k]) os << ',' << format_number(v);
    os << '\n';
  }
  return os.str();
}

inline std::string to_csv(const IntervalSet& s) {
  std::ostringstream os;
  os << "kind,value\n";
  for (double v : s.forward) os << "forward," << format_number(v) << '\n';
  for (double v : s.serial) os << "serial," << format_number(v) << '\n';
  for (double v : s.backward) os << "backward," << format_number(v) << '\n';
  return os.str();
}

inline std::string to_csv(const EstimateTable& t) {
  std::ostringstream os;
  os << "parameter,point,se,formula_id\n";
  for (const auto& r : t.rows)
    os << r.parameter << ',' << format_number(r.estimate.point) << ','
       << format_number(r.estimate.se) << ',' << r.estimate.formula_id << '\n';
  return os.str();
}

inline std::string to_csv(const IncidenceSeries& s) {
  std::ostringstream os;
  os << "period,count\n";
  for (std::size_t k = 0; k < s.counts.size(); ++k) os << k << ',' << s.counts[k] << '\n';
  return os.str();
}

inline std::string to_csv(const RemovalTable& r) {
  std::ostringstream os;
  os << "subject,removal_time,index\n";
  for (std::size_t k = 0; k < r.subjects.size(); ++k)
    os << r.subjects[k] << ',' << format_number(r.data.removal_times[k]) << ','
       << (k == r.data.index ? 1 : 0) << '\n';
  return os.str();
}

// ---- readers ----

inline EventLog read_event_log(const CsvTable& t, std::optional<int> n = std::nullopt) {
  expect_header(t, {"time", "kind", "subject", "infector"});
  EventLog log;
  int max_id = -1;
  for (const auto& row : t.rows) {
    Event e;
    e.time = parse_double(row, 0);
    if (!(e.time >= 0.0)) throw DataError("event time must be >= 0", row.line, 1);
    try {
      e.kind = parse_event_kind(row.fields[1]);
    } catch (const DataError& err) {
      throw DataError(err.what(), row.line, 2);
    }
    const long subject = parse_count(row, 2);
    e.subject = static_cast<int>(subject);
    if (!row.fields[3].empty()) {
      if (e.kind != EventKind::infection)
        throw DataError("only infection events carry an infector", row.line, 4);
      e.infector = static_cast<int>(parse_count(row, 3));
      max_id = std::max(max_id, e.infector);
    }
    max_id = std::max(max_id, e.subject);
    log.events.push_back(e);
  }
  log.n = n.value_or(max_id + 1);
  log.end_time = log.events.empty() ? 0.0 : log.events.back().time;
  try {
    validate(log);
  } catch (const DomainError& err) {
    throw DataError(std::string("inconsistent event log: ") + err.what());
  }
  return log;
}

inline HouseholdRecords read_household_records(const CsvTable& t) {
  expect_header(t, {"household_id", "event", "time"});
  HouseholdRecords h;
  double last = 0.0;
  for (const auto& row : t.rows) {
    HouseholdRecord r;
    r.household = static_cast<int>(parse_count(row, 0));
    const auto& ev = row.fields[1];
    if (ev == "index") r.kind = HouseholdRecord::Kind::index;
    else if (ev == "infection") r.kind = HouseholdRecord::Kind::infection;
    else if (ev == "recovery") r.kind = HouseholdRecord::Kind::recovery;
    else throw DataError("unknown household event '" + ev + "'", row.line, 2);
    r.time = parse_double(row, 2);
    if (!(r.time >= last)) throw DataError("event times must be nondecreasing", row.line, 3);
    last = r.time;
    h.records.push_back(r);
  }
  return h;
}

inline HouseholdSizes read_household_sizes(const CsvTable& t) {
  expect_header(t, {"household_id", "size"});
  std::map<long, int> by_id;
  for (const auto& row : t.rows) {
    const long id = parse_count(row, 0);
    const long size = parse_count(row, 1);
    if (size < 1) throw DataError("household size must be >= 1", row.line, 2);
    if (!by_id.emplace(id, static_cast<int>(size)).second)
      throw DataError("duplicate household id " + std::to_string(id), row.line, 1);
  }
  HouseholdSizes h;
  long expect = 0;
  for (const auto& [id, size] : by_id) {
    if (id != expect) throw DataError("household ids must be 0..H-1 without gaps");
    h.sizes.push_back(size);
    ++expect;
  }
  return h;
}

inline PatchTrajectory read_patch_trajectory(const CsvTable& t) {
  expect_header(t, {"t", "S1", "I1", "R1", "S2", "I2", "R2"});
  PatchTrajectory p;
  for (const auto& row : t.rows) {
    PatchState s{parse_double(row, 0), parse_double(row, 1), parse_double(row, 2),
                 parse_double(row, 3), parse_double(row, 4), parse_double(row, 5),
                 parse_double(row, 6)};
    p.states.push_back(s);
  }
  return p;
}

/// Units appear in order of first mention; periods are the sorted distinct
/// (year, week) pairs, and every unit must report every period once.
inline CountPanel read_panel(const CsvTable& t) {
  expect_header(t, {"unit", "week", "year", "count"});
  std::vector<std::string> labels;
  std::map<std::string, std::size_t> unit_index;
  std::set<std::pair<long, long>> periods;
  struct Cell {
    std::size_t unit;
    std::pair<long, long> period;
    long count;
    std::size_t line;
  };
  std::vector<Cell> cells;
  for (const auto& row : t.rows) {
    const auto& label = row.fields[0];
    if (label.empty()) throw DataError("empty unit label", row.line, 1);
    auto [it, inserted] = unit_index.emplace(label, labels.size());
    if (inserted) labels.push_back(label);
    const long week = parse_long(row, 1);
    const long year = parse_long(row, 2);
    if (week < 1) throw DataError("week must be >= 1", row.line, 2);
    const long count = parse_count(row, 3);
    periods.emplace(year, week);
    cells.push_back({it->second, {year, week}, count, row.line});
  }
  if (cells.empty()) throw DataError("panel file has no data rows", 1);
  std::map<std::pair<long, long>, std::size_t> period_index;
  CountPanel p;
  for (const auto& pr : periods) {
    period_index.emplace(pr, period_index.size());
    p.year.push_back(static_cast<int>(pr.first));
    p.week.push_back(static_cast<int>(pr.second));
  }
  p.labels = labels;
  p.y.assign(labels.size(), std::vector<long>(periods.size(), -1));
  for (const auto& c : cells) {
    long& slot = p.y[c.unit][period_index.at(c.period)];
    if (slot >= 0) throw DataError("duplicate unit/period row", c.line);
    slot = c.count;
  }
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t k = 0; k < periods.size(); ++k)
      if (p.y[i][k] < 0)
        throw DataError("unit '" + labels[i] + "' has no count for week " +
                        std::to_string(p.week[k]) + " of year " + std::to_string(p.year[k]));
  return p;
}

inline WeightList read_weights(const CsvTable& t) {
  expect_header(t, {"from", "to", "weight"});
  WeightList w;
  for (const auto& row : t.rows) {
    WeightEntry e{row.fields[0], row.fields[1], parse_double(row, 2)};
    if (!(e.weight >= 0.0)) throw DataError("weights must be >= 0", row.line, 3);
    if (e.from == e.to && e.weight != 0.0)
      throw DataError("self weight must be 0", row.line, 3);
    w.entries.push_back(e);
  }
  return w;
}

/// Dense matrix w(from, to) over the panel's units; absent pairs are 0.
inline Eigen::MatrixXd weight_matrix(const WeightList& w, const CountPanel& panel) {
  const auto m = static_cast<Eigen::Index>(panel.units());
  std::map<std::string, Eigen::Index> idx;
  for (Eigen::Index i = 0; i < m; ++i) idx[panel_label(panel, static_cast<std::size_t>(i))] = i;
  Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(m, m);
  for (const auto& e : w.entries) {
    const auto f = idx.find(e.from);
    const auto t = idx.find(e.to);
    if (f == idx.end() || t == idx.end())
      throw DataError("weight refers to unknown unit '" + (f == idx.end() ? e.from : e.to) + "'");
    mat(f->second, t->second) = e.weight;
  }
  return mat;
}

inline DetectorTable read_detector(const CsvTable& t) {
  expect_header(t, {"s", "y_s", "mu_s", "g_s", "alarm"});
  DetectorTable d;
  for (const auto& row : t.rows) {
    DetectorRow r;
    r.s = static_cast<std::size_t>(parse_count(row, 0));
    r.y_s = parse_count(row, 1);
    const bool empty2 = row.fields[2].empty(), empty3 = row.fields[3].empty(),
               empty4 = row.fields[4].empty();
    if (empty2 != empty3 || empty3 != empty4)
      throw DataError("mu_s, g_s and alarm must be all present or all empty", row.line);
    if (!empty2) {
      r.mu_s = parse_double(row, 2);
      r.g_s = parse_count(row, 3);
      const long a = parse_long(row, 4);
      if (a != 0 && a != 1) throw DataError("alarm must be 0 or 1", row.line, 5);
      r.alarm = a == 1;
    }
    d.rows.push_back(r);
  }
  return d;
}

inline PosteriorSample read_posterior(const CsvTable& t) {
  if (t.header.empty() || t.header.front() != "draw" || t.header.size() < 2)
    throw DataError("posterior header must be draw,<param>,...", 1);
  PosteriorSample s;
  s.names.assign(t.header.begin() + 1, t.header.end());
  for (const auto& row : t.rows) {
    (void)parse_count(row, 0);
    std::vector<double> d;
    for (std::size_t c = 1; c < row.fields.size(); ++c) d.push_back(parse_double(row, c));
    s.draws.push_back(std::move(d));
  }
  return s;
}

inline IntervalSet read_intervals(const CsvTable& t) {
  expect_header(t, {"kind", "value"});
  IntervalSet s;
  for (const auto& row : t.rows) {
    const double v = parse_double(row, 1);
    const auto& k = row.fields[0];
    if (k == "forward") s.forward.push_back(v);
    else if (k == "serial") s.serial.push_back(v);
    else if (k == "backward") s.backward.push_back(v);
    else throw DataError("unknown interval kind '" + k + "'", row.line, 1);
  }
  return s;
}

inline EstimateTable read_estimates(const CsvTable& t) {
  expect_header(t, {"parameter", "point", "se", "formula_id"});
  EstimateTable e;
  for (const auto& row : t.rows)
    e.rows.push_back({row.fields[0], {parse_double(row, 1), parse_double(row, 2), row.fields[3]}});
  return e;
}

inline IncidenceSeries read_incidence(const CsvTable& t) {
  expect_header(t, {"period", "count"});
  IncidenceSeries s;
  for (const auto& row : t.rows) {
    const long k = parse_count(row, 0);
    if (static_cast<std::size_t>(k) != s.counts.size())
      throw DataError("periods must run 0, 1, 2, ... without gaps", row.line, 1);
    s.counts.push_back(parse_count(row, 1));
  }
  return s;
}

inline RemovalTable read_removals(const CsvTable& t, std::optional<int> n) {
  expect_header(t, {"subject", "removal_time", "index"});
  RemovalTable r;
  std::optional<std::size_t> index;
  std::set<long> seen;
  for (const auto& row : t.rows) {
    const long subject = parse_count(row, 0);
    if (!seen.insert(subject).second)
      throw DataError("duplicate subject " + std::to_string(subject), row.line, 1);
    const double time = parse_double(row, 1);
    if (!(time > 0.0)) throw DataError("removal time must be > 0", row.line, 2);
    const long flag = parse_long(row, 2);
    if (flag != 0 && flag != 1) throw DataError("index flag must be 0 or 1", row.line, 3);
    if (flag == 1) {
      if (index) throw DataError("more than one index case", row.line, 3);
      index = r.subjects.size();
    }
    r.subjects.push_back(static_cast<int>(subject));
    r.data.removal_times.push_back(time);
  }
  if (!index) throw DataError("no index case flagged");
  r.data.index = *index;
  r.data.n = n.value_or(0);
  if (!n) throw DataError("removal data need the population size");
  if (static_cast<long>(r.subjects.size()) > *n)
    throw DataError("more removals than the population size");
  return r;
}

using Dataset = std::variant<EventLog, HouseholdRecords, HouseholdSizes, PatchTrajectory,
                             CountPanel, WeightList, DetectorTable, PosteriorSample, IntervalSet,
                             EstimateTable, IncidenceSeries, RemovalTable>;

inline Dataset ingest_table(const CsvTable& t, Schema schema, const IngestOptions& opts = {}) {
  switch (schema) {
    case Schema::event_log: return read_event_log(t, opts.n);
    case Schema::household: return read_household_records(t);
    case Schema::household_sizes: return read_household_sizes(t);
    case Schema::patch_trajectory: return read_patch_trajectory(t);
    case Schema::panel: return read_panel(t);
    case Schema::weights: return read_weights(t);
    case Schema::detector: return read_detector(t);
    case Schema::posterior: return read_posterior(t);
    case Schema::intervals: return read_intervals(t);
    case Schema::estimates: return read_estimates(t);
    case Schema::incidence: return read_incidence(t);
    case Schema::removals: return read_removals(t, opts.n);
  }
  throw DomainError("unknown schema");
}

/// Reads and validates a file against one of the documented schemas.
/// DataError reports the line (and column) of the first violation.
inline Dataset ingest_csv(const std::filesystem::path& path, Schema schema,
                          const IngestOptions& opts = {}) {
  return ingest_table(read_csv(path), schema, opts);
}

inline Dataset ingest_string(const std::string& text, Schema schema, const IngestOptions& opts = {}) {
  std::istringstream in(text);
  return ingest_table(parse_csv(in), schema, opts);
}

}  // namespace epistat::io
