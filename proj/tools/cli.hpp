#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "epistat/epistat.hpp"

namespace epistat::cli {

/// Bad combination of flags detected after parsing; exits with code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int { ok = 0, usage = 2, domain = 3, convergence = 4, internal = 1 };

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError(what + ": expected a number, got '" + s + "'");
  }
}

inline std::vector<double> to_doubles(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& part : split(s, ',')) out.push_back(to_double(part, what));
  return out;
}

/// "kind:a,b" into kind and numeric arguments.
inline std::pair<std::string, std::vector<double>> kind_args(const std::string& s,
                                                             const std::string& what) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw UsageError(what + ": expected kind:args, got '" + s + "'");
  return {s.substr(0, colon), to_doubles(s.substr(colon + 1), what)};
}

inline PriorDist parse_prior(const std::string& s, const std::string& what) {
  const auto [kind, args] = kind_args(s, what);
  if (args.size() != 2) throw UsageError(what + ": need two hyperparameters");
  if (kind == "gamma") return GammaPrior{args[0], args[1]};
  if (kind == "uniform") return UniformPrior{args[0], args[1]};
  throw UsageError(what + ": unknown prior '" + kind + "' (gamma or uniform)");
}

inline GenerationTimeDist parse_gen_dist(const std::string& s) {
  const auto [kind, args] = kind_args(s, "--gen-dist");
  if ((kind == "exp" || kind == "exponential") && args.size() == 1)
    return GenerationTimeDist::exponential(args[0]);
  if (kind == "fixed" && args.size() == 1) return GenerationTimeDist::fixed(args[0]);
  if (kind == "gamma" && args.size() == 2) return GenerationTimeDist::gamma(args[0], args[1]);
  if (kind == "empirical" && !args.empty()) return GenerationTimeDist::empirical(args);
  throw UsageError("--gen-dist: expected exp:rate, fixed:T, gamma:shape,rate or empirical:t1,t2,...");
}

inline std::pair<double, double> parse_range(const std::string& s, const std::string& what) {
  const auto parts = split(s, ':');
  if (parts.size() != 2) throw UsageError(what + ": expected a:b, got '" + s + "'");
  return {to_double(parts[0], what), to_double(parts[1], what)};
}

/// CSV text as {"columns": [...], "rows": [[...], ...]}, numbers kept numeric.
inline nlohmann::ordered_json csv_to_json(const std::string& csv) {
  std::istringstream in(csv);
  const auto table = io::parse_csv(in);
  nlohmann::ordered_json j;
  j["columns"] = table.header;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    auto r = nlohmann::ordered_json::array();
    for (const auto& f : row.fields) {
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (!f.empty() && end == f.c_str() + f.size() && std::isfinite(v)) r.push_back(v);
      else r.push_back(f);
    }
    j["rows"].push_back(std::move(r));
  }
  return j;
}

inline void add_row(std::ostringstream& os, const std::string& name, double value) {
  os << name << ',' << io::format_number(value) << '\n';
}

}  // namespace detail

/// What a subcommand produced: a CSV table plus extra report fields.
struct Result {
  std::string csv;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
  std::optional<std::uint64_t> seed;
};

struct OutputOptions {
  std::string out;     // empty: standard output
  std::string format = "csv";
  std::string report;  // optional JSON envelope path
};

inline void add_output_options(CLI::App* sub, OutputOptions& o) {
  sub->add_option("--out,-o", o.out, "Output file (default: standard output)");
  sub->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("--report", o.report, "Also write a JSON report envelope to this file");
}

// ---- subcommands ----

struct SimulateArgs {
  std::string model = "gse";
  double lambda = 1.5, gamma = 1.0, p = 0.0, lambda_h = 0.0, lambda_g = 0.0;
  int n = 0, i0 = 1, replicates = 1, household_size = 0, households = 0;
  std::optional<double> latent_rate;
  bool fixed = false;
  std::optional<std::uint64_t> seed;
  std::string sizes;
  unsigned threads = 0;
};

inline Result run_simulate(const SimulateArgs& a) {
  if (!a.seed) throw UsageError("simulate needs --seed");
  Result r;
  r.seed = a.seed;
  std::ostringstream os;
  if (a.model == "reed-frost") {
    const auto g = simulate_reed_frost({a.n, a.p, a.i0}, *a.seed);
    os << "generation,infectives\n";
    for (std::size_t k = 0; k < g.size(); ++k) os << k << ',' << g[k] << '\n';
    r.extra["final_size"] = total_infected(g);
    r.csv = os.str();
    return r;
  }
  if (a.model == "household") {
    HouseholdParams hp;
    hp.lambda_H = a.lambda_h;
    hp.lambda_G = a.lambda_g;
    hp.gamma = a.gamma;
    if (!a.sizes.empty()) {
      hp.sizes = std::get<io::HouseholdSizes>(io::ingest_csv(a.sizes, io::Schema::household_sizes)).sizes;
    } else {
      if (a.household_size < 1 || a.households < 1)
        throw UsageError("household model needs --sizes or --household-size and --households");
      hp.sizes.assign(static_cast<std::size_t>(a.households), a.household_size);
    }
    const auto hl = simulate_households(hp, *a.seed);
    const auto d = to_outbreak_data(hl);
    r.csv = io::to_csv(io::HouseholdRecords{d.records});
    r.extra["final_size"] = final_size(hl.log);
    r.extra["n"] = hp.n();
    return r;
  }
  GseParams gp{a.lambda, a.gamma, a.n,
               a.fixed ? InfectiousPeriod::fixed : InfectiousPeriod::exponential, a.latent_rate};
  gp.validate();
  if (a.replicates == 1) {
    const auto log = simulate_gse(gp, *a.seed);
    r.csv = io::to_csv(log);
    r.extra["n"] = log.n;
    r.extra["final_size"] = final_size(log);
    r.extra["end_time"] = log.end_time;
    return r;
  }
  if (a.replicates < 1) throw UsageError("--replicates must be >= 1");
  ReplicateOptions opts;
  opts.threads = a.threads;
  const auto s = replicate(gp, a.replicates, *a.seed, opts);
  os << "replicate,final_size,major\n";
  for (std::size_t k = 0; k < s.final_sizes.size(); ++k)
    os << k << ',' << s.final_sizes[k] << ','
       << (classify_major(s.final_sizes[k], gp.n, opts.cutoff_fraction) ? 1 : 0) << '\n';
  r.csv = os.str();
  r.extra["major_fraction"] = s.major_fraction;
  return r;
}

struct EstimateArgs {
  std::string mode = "final-size";
  std::optional<long> n, z, n_immune, m, z_m, k;
  double cv = default_cv;
  std::string input;
};

inline Result run_estimate(EstimateArgs a) {
  if (!a.input.empty()) {
    const auto t = io::read_csv(a.input);
    if (t.rows.size() != 1) throw DataError("estimate input must hold exactly one data row");
    const auto& row = t.rows.front();
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      const auto& h = t.header[c];
      const long v = io::parse_count(row, c);
      if (h == "n") a.n = v;
      else if (h == "Z" || h == "z") a.z = v;
      else if (h == "n_immune") a.n_immune = v;
      else if (h == "m") a.m = v;
      else if (h == "Z_m" || h == "z_m") a.z_m = v;
      else if (h == "k") a.k = v;
      else throw DataError("unknown column '" + h + "'", 1, c + 1);
    }
    if (a.mode == "final-size" && a.m && a.z_m) a.mode = "sample";
  }
  io::EstimateTable table;
  if (a.mode == "pair") {
    if (!a.k || !a.z) throw UsageError("estimate pair needs --k and --z");
    table.rows.push_back({"p", estimate_pair_prob({*a.k, *a.z})});
  } else if (a.mode == "sample") {
    if (!a.n || !a.m || !a.z_m) throw UsageError("estimate sample needs --n, --m and --zm");
    const SampleObservation obs{*a.n, *a.m, *a.z_m};
    table.rows.push_back({"R0", estimate_r0_sample(obs, a.cv)});
    table.rows.push_back({"vc", estimate_vc_sample(obs, a.cv)});
  } else {
    if (!a.n || !a.z) throw UsageError("estimate final-size needs --n and --z");
    const FinalSizeObservation obs{*a.n, *a.z, a.n_immune.value_or(0)};
    table.rows.push_back({"R0", estimate_r0_final_size(obs, a.cv)});
    table.rows.push_back({"vc", estimate_vc_final_size(obs, a.cv)});
  }
  return {io::to_csv(table), {}, std::nullopt};
}

struct MultitypeArgs {
  std::string config;
  std::string observed;
  std::vector<std::string> free;
};

inline MultitypeConfig read_multitype_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid JSON: ") + e.what());
  }
  MultitypeConfig cfg;
  try {
    const auto pi = j.at("pi").get<std::vector<double>>();
    const auto gamma = j.at("gamma").get<std::vector<double>>();
    const auto lambda = j.at("lambda").get<std::vector<std::vector<double>>>();
    const auto k = static_cast<Eigen::Index>(pi.size());
    cfg.pi = Eigen::Map<const Eigen::VectorXd>(pi.data(), k);
    cfg.gamma = Eigen::Map<const Eigen::VectorXd>(gamma.data(), static_cast<Eigen::Index>(gamma.size()));
    cfg.lambda.resize(static_cast<Eigen::Index>(lambda.size()), k);
    for (std::size_t i = 0; i < lambda.size(); ++i) {
      if (lambda[i].size() != pi.size()) throw DataError("lambda must be k x k");
      for (std::size_t jj = 0; jj < pi.size(); ++jj)
        cfg.lambda(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(jj)) = lambda[i][jj];
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("multitype config needs pi, lambda, gamma: ") + e.what());
  }
  return cfg;
}

inline FreeParameter parse_free(const std::string& s) {
  const auto parts = detail::split(s, ':');
  auto idx = [&](std::size_t k) {
    if (k >= parts.size()) throw UsageError("--free: missing index in '" + s + "'");
    return static_cast<int>(detail::to_double(parts[k], "--free")) - 1;
  };
  if (parts.empty()) throw UsageError("--free: empty");
  if (parts[0] == "contact") return FreeParameter::contact(idx(1), idx(2));
  if (parts[0] == "recovery") return FreeParameter::recovery(idx(1));
  if (parts[0] == "infectivity") return FreeParameter::infectivity(idx(1));
  if (parts[0] == "susceptibility") return FreeParameter::susceptibility(idx(1));
  throw UsageError("--free: expected contact:i:j, recovery:i, infectivity:i or susceptibility:j");
}

inline Result run_multitype(const MultitypeArgs& a) {
  const auto cfg = read_multitype_config(a.config);
  std::ostringstream os;
  os << "parameter,value\n";
  Result r;
  if (!a.observed.empty()) {
    const auto tau = detail::to_doubles(a.observed, "--observed");
    CalibrationTemplate tmpl{cfg, {}};
    for (const auto& f : a.free) tmpl.free.push_back(parse_free(f));
    const auto fit = multitype_calibrate(
        Eigen::Map<const Eigen::VectorXd>(tau.data(), static_cast<Eigen::Index>(tau.size())), tmpl);
    detail::add_row(os, "R0", fit.r0);
    for (std::size_t p = 0; p < a.free.size(); ++p)
      detail::add_row(os, a.free[p], fit.values(static_cast<Eigen::Index>(p)));
    r.extra["residual"] = fit.residual;
    r.extra["iterations"] = fit.iterations;
  } else {
    detail::add_row(os, "R0", ngm_r0(cfg));
    const auto tau = multitype_final_size_solve(cfg);
    for (Eigen::Index i = 0; i < tau.size(); ++i)
      detail::add_row(os, "tau[" + std::to_string(i + 1) + "]", tau(i));
    detail::add_row(os, "tau_overall", cfg.pi.dot(tau));
  }
  r.csv = os.str();
  return r;
}

struct HouseholdArgs {
  std::string data, sizes;
  std::optional<double> t_obs;
};

inline Result run_household(const HouseholdArgs& a) {
  HouseholdOutbreakData d;
  d.records = std::get<io::HouseholdRecords>(io::ingest_csv(a.data, io::Schema::household)).records;
  d.sizes = std::get<io::HouseholdSizes>(io::ingest_csv(a.sizes, io::Schema::household_sizes)).sizes;
  d.t_obs = a.t_obs.value_or(d.records.empty() ? 0.0 : d.records.back().time);
  const auto fit = household_mle(d);
  io::EstimateTable t;
  t.rows.push_back({"lambda_H", fit.lambda_H});
  t.rows.push_back({"lambda_G", fit.lambda_G});
  Result r{io::to_csv(t), {}, std::nullopt};
  r.extra["loglik"] = fit.loglik;
  r.extra["boundary_H"] = fit.boundary_H;
  r.extra["boundary_G"] = fit.boundary_G;
  return r;
}

struct PatchArgs {
  PatchParams p;
  double t_end = 100.0, dt = 0.01;
  int every = 1;
};

inline Result run_patches(const PatchArgs& a) {
  if (a.every < 1) throw UsageError("--every must be >= 1");
  const auto states = simulate_two_patch(a.p, a.t_end, a.dt);
  io::PatchTrajectory tr;
  for (std::size_t k = 0; k < states.size(); ++k)
    if (k % static_cast<std::size_t>(a.every) == 0 || k + 1 == states.size()) tr.states.push_back(states[k]);
  return {io::to_csv(tr), {}, std::nullopt};
}

struct GrowthArgs {
  std::string input, window, method = "poisson";
  double period_length = 1.0;
};

inline Result run_growth(const GrowthArgs& a) {
  auto series = std::get<IncidenceSeries>(io::ingest_csv(a.input, io::Schema::incidence));
  series.period_length = a.period_length;
  Window w{0, series.counts.empty() ? 0 : series.counts.size() - 1};
  if (!a.window.empty()) {
    const auto [lo, hi] = detail::parse_range(a.window, "--window");
    if (lo < 0 || hi < lo) throw UsageError("--window: need 0 <= a <= b");
    w = {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
  }
  const auto method = a.method == "lsq" ? GrowthMethod::log_least_squares : GrowthMethod::poisson_regression;
  const auto g = estimate_growth_rate(series, w, method);
  io::EstimateTable t;
  t.rows.push_back({"r", {g.r, g.se, a.method == "lsq" ? "growth_log_lsq" : "growth_poisson"}});
  return {io::to_csv(t), {}, std::nullopt};
}

struct EulerLotkaArgs {
  std::string gen_dist;
  std::optional<double> r0, r;
};

inline Result run_euler_lotka(const EulerLotkaArgs& a) {
  if (a.r0.has_value() == a.r.has_value()) throw UsageError("euler-lotka needs exactly one of --r0 or --r");
  const auto g = detail::parse_gen_dist(a.gen_dist);
  std::ostringstream os;
  os << "parameter,value\n";
  if (a.r0) {
    detail::add_row(os, "R0", *a.r0);
    detail::add_row(os, "r", euler_lotka_r(*a.r0, g));
  } else {
    detail::add_row(os, "r", *a.r);
    detail::add_row(os, "R0", r0_from_growth(*a.r, g));
  }
  return {os.str(), {}, std::nullopt};
}

struct IntervalArgs {
  std::string input;
  std::optional<int> n;
  std::optional<double> lambda, gamma;
  std::optional<std::uint64_t> seed;
  std::string window, growth_phase;
  std::optional<double> onset_delay;
};

inline Result run_intervals(const IntervalArgs& a) {
  Result r;
  EventLog log;
  if (!a.input.empty()) {
    io::IngestOptions io_opts;
    io_opts.n = a.n;
    log = std::get<EventLog>(io::ingest_csv(a.input, io::Schema::event_log, io_opts));
  } else {
    if (!a.lambda || !a.gamma || !a.n || !a.seed)
      throw UsageError("intervals needs --input, or --lambda, --gamma, --n and --seed to simulate");
    log = simulate_gse({*a.lambda, *a.gamma, *a.n, InfectiousPeriod::exponential, std::nullopt}, *a.seed);
    r.seed = a.seed;
  }
  IntervalOptions opts;
  if (!a.window.empty() && !a.growth_phase.empty())
    throw UsageError("--window and --growth-phase are exclusive");
  if (!a.window.empty()) {
    const auto [lo, hi] = detail::parse_range(a.window, "--window");
    opts.window = TimeWindow{lo, hi};
  } else if (!a.growth_phase.empty()) {
    const auto [lo, hi] = detail::parse_range(a.growth_phase, "--growth-phase");
    opts.window = growth_phase_window(log, lo, hi);
  }
  std::vector<double> onsets;
  if (a.onset_delay) {
    onsets.assign(static_cast<std::size_t>(log.n), *a.onset_delay);
    opts.onset_offsets = onsets;
  }
  const auto set = extract_intervals(log, opts);
  r.csv = io::to_csv(set);
  if (opts.window) r.extra["window"] = {opts.window->start, opts.window->end};
  return r;
}

struct AbcArgs {
  std::string model = "gse";
  int n = 0, i0 = 1;
  double gamma = 1.0;
  std::string prior_lambda = "gamma:1,1", prior_gamma, prior_p = "uniform:0,1";
  std::string summaries = "final_size", observed, observed_log;
  double epsilon = 0.0, bin_width = 1.0;
  std::size_t draws = 1000, pilot = 200;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

inline Result run_abc(const AbcArgs& a) {
  if (!a.seed) throw UsageError("abc needs --seed");
  AbcConfig cfg;
  cfg.epsilon = a.epsilon;
  cfg.draws = a.draws;
  cfg.pilot_draws = a.pilot;
  cfg.threads = a.threads;
  cfg.summaries.clear();
  for (const auto& s : detail::split(a.summaries, ',')) cfg.summaries.push_back(parse_epidemic_summary(s));
  cfg.validate();

  std::vector<double> observed;
  if (!a.observed_log.empty()) {
    io::IngestOptions io_opts;
    io_opts.n = a.n > 0 ? std::optional<int>(a.n) : std::nullopt;
    const auto log = std::get<EventLog>(io::ingest_csv(a.observed_log, io::Schema::event_log, io_opts));
    observed = epidemic_summaries(log, cfg.summaries, a.bin_width);
  } else if (!a.observed.empty()) {
    observed = detail::to_doubles(a.observed, "--observed");
  } else {
    throw UsageError("abc needs --observed or --observed-log");
  }
  if (observed.size() != cfg.summaries.size())
    throw UsageError("--observed must have one value per summary");

  PriorSpec prior;
  AbcResult res;
  if (a.model == "reed-frost") {
    if (cfg.summaries.size() != 1 || cfg.summaries[0] != EpidemicSummary::final_size)
      throw UsageError("the Reed-Frost model supports the final_size summary only");
    prior = {{"p"}, {detail::parse_prior(a.prior_p, "--prior-p")}};
    const ReedFrostParams base{a.n, 0.0, a.i0};
    base.validate();
    auto sim = [&](const std::vector<double>& th, Rng& rng) {
      ReedFrostParams p = base;
      p.p = th[0];
      return std::vector<double>{static_cast<double>(total_infected(simulate_reed_frost(p, rng.engine()())))};
    };
    res = abc_rejection(sim, observed, prior, cfg, *a.seed);
  } else {
    const bool fit_gamma = !a.prior_gamma.empty();
    prior.names = {"lambda"};
    prior.dists = {detail::parse_prior(a.prior_lambda, "--prior-lambda")};
    if (fit_gamma) {
      prior.names.push_back("gamma");
      prior.dists.push_back(detail::parse_prior(a.prior_gamma, "--prior-gamma"));
    }
    auto sim = [&](const std::vector<double>& th, Rng& rng) {
      GseParams p{th[0], fit_gamma ? th[1] : a.gamma, a.n, InfectiousPeriod::exponential, std::nullopt};
      return epidemic_summaries(simulate_gse(p, rng.engine()()), cfg.summaries, a.bin_width);
    };
    res = abc_rejection(sim, observed, prior, cfg, *a.seed);
  }
  Result r{io::to_csv(res.sample), {}, a.seed};
  r.extra["acceptance_rate"] = res.sample.acceptance_rate;
  r.extra["accepted"] = res.sample.draws.size();
  r.extra["summary_scale"] = res.scale;
  r.extra["ess"] = res.sample.ess;
  return r;
}

struct DaMcmcArgs {
  std::string input;
  int n = 0;
  std::string prior_lambda = "gamma:1,1", prior_gamma = "gamma:1,1";
  std::size_t iterations = 10000, thin = 1, updates = 1;
  double burn_in = 0.2;
  bool fixed_times = false;
  std::optional<std::uint64_t> seed;
};

inline Result run_da_mcmc(const DaMcmcArgs& a) {
  if (!a.seed) throw UsageError("da-mcmc needs --seed");
  io::IngestOptions io_opts;
  io_opts.n = a.n;
  const auto table = std::get<io::RemovalTable>(io::ingest_csv(a.input, io::Schema::removals, io_opts));
  const PriorSpec prior{{"lambda", "gamma"},
                        {detail::parse_prior(a.prior_lambda, "--prior-lambda"),
                         detail::parse_prior(a.prior_gamma, "--prior-gamma")}};
  DaMcmcConfig cfg;
  cfg.iterations = a.iterations;
  cfg.thin = a.thin;
  cfg.burn_in_fraction = a.burn_in;
  cfg.update_infection_times = !a.fixed_times;
  cfg.infection_updates_per_iteration = a.updates;
  const auto s = da_mcmc_gse(table.data, prior, cfg, *a.seed);
  Result r{io::to_csv(s), {}, a.seed};
  r.extra["acceptance_rate"] = s.acceptance_rate;
  r.extra["infeasible_proposals"] = s.infeasible;
  r.extra["ess"] = s.ess;
  auto summary = nlohmann::ordered_json::array();
  for (const auto& c : posterior_summary(s)) {
    summary.push_back({{"name", c.name}, {"mean", c.mean}, {"lower", c.lower}, {"upper", c.upper},
                       {"ess", c.ess}, {"degenerate", c.degenerate}});
  }
  r.extra["summary"] = summary;
  return r;
}

struct SurveilArgs {
  std::string input, unit;
  FarringtonConfig cfg;
  std::size_t start = 0;
};

inline std::size_t pick_unit(const CountPanel& panel, const std::string& unit) {
  if (unit.empty()) {
    if (panel.units() != 1) throw UsageError("panel has several units; choose one with --unit");
    return 0;
  }
  for (std::size_t i = 0; i < panel.units(); ++i)
    if (io::panel_label(panel, i) == unit) return i;
  throw UsageError("unit '" + unit + "' not in panel");
}

inline Result run_surveil(const SurveilArgs& a) {
  const auto panel = std::get<CountPanel>(io::ingest_csv(a.input, io::Schema::panel));
  const auto& y = panel.y[pick_unit(panel, a.unit)];
  const auto det = run_detector(y, a.cfg, a.start);
  Result r{io::to_csv(io::to_detector_table(det)), {}, std::nullopt};
  r.extra["formula_id"] = farrington_formula_id;
  if (det.alarm_time) r.extra["alarm_time"] = *det.alarm_time;
  else r.extra["alarm_time"] = nullptr;
  return r;
}

struct EeArgs {
  std::string input, weights;
  EEModelSpec spec;
  bool no_ar = false, per_unit_nu = false;
  int lag = 1;
};

inline CountPanel load_panel(const EeArgs& a) {
  auto panel = std::get<CountPanel>(io::ingest_csv(a.input, io::Schema::panel));
  panel.lag = a.lag;
  if (!a.weights.empty())
    panel.weights = io::weight_matrix(std::get<io::WeightList>(io::ingest_csv(a.weights, io::Schema::weights)), panel);
  return panel;
}

inline EEModelSpec ee_spec(const EeArgs& a) {
  EEModelSpec s = a.spec;
  s.include_ar = !a.no_ar;
  s.shared_nu = !a.per_unit_nu;
  if (s.include_neighbor && a.weights.empty()) throw UsageError("--neighbor needs --weights");
  return s;
}

inline Result run_ee_fit(const EeArgs& a) {
  const auto panel = load_panel(a);
  const auto fit = ee_fit(panel, ee_spec(a));
  io::EstimateTable t;
  for (std::size_t k = 0; k < fit.names.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    t.rows.push_back({fit.names[k], {fit.estimate(kk), fit.se(kk), "ee_negbin_mle"}});
  }
  Result r{io::to_csv(t), {}, std::nullopt};
  r.extra["loglik"] = fit.loglik;
  r.extra["converged"] = fit.converged;
  r.extra["gradient_norm"] = fit.grad_norm;
  r.extra["iterations"] = fit.iterations;
  r.extra["boundary_lambda_ar"] = fit.boundary_ar;
  return r;
}

struct ScoreArgs {
  std::string dist = "poisson";
  double mu = 1.0, phi = 0.0;
  long value = 0;
  std::string y;
  EeArgs panel;
  std::optional<std::size_t> from;
};

inline Result run_score(const ScoreArgs& a) {
  std::ostringstream os;
  Result r;
  if (!a.panel.input.empty()) {
    // One-step-ahead predictions from a model fitted to the panel.
    const auto panel = load_panel(a.panel);
    const auto fit = ee_fit(panel, ee_spec(a.panel));
    const std::size_t first = a.from.value_or(epistat::detail::ee_first_period(panel.lag));
    os << "unit,period,y,log_score,zero_mass\n";
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t t = std::max(first, epistat::detail::ee_first_period(panel.lag)); t < panel.periods(); ++t) {
      const auto preds = ee_predict_one_step(fit, panel, t);
      for (std::size_t i = 0; i < panel.units(); ++i) {
        const auto s = log_score(preds[i], panel.y[i][t]);
        os << io::panel_label(panel, i) << ',' << t << ',' << panel.y[i][t] << ','
           << io::format_number(s.value) << ',' << (s.zero_mass ? 1 : 0) << '\n';
        total += s.value;
        ++count;
      }
    }
    r.extra["mean_log_score"] = count ? total / static_cast<double>(count) : 0.0;
    r.csv = os.str();
    return r;
  }
  Predictive p;
  if (a.dist == "poisson") p = PoissonPredictive{a.mu};
  else if (a.dist == "negbin") {
    NegBin nb{a.mu, a.phi};
    nb.validate();
    p = nb;
  } else p = DegeneratePredictive{a.value};
  if (a.y.empty()) throw UsageError("score needs --y (comma-separated counts) or --input");
  os << "y,log_score,zero_mass\n";
  double total = 0.0;
  bool zero = false;
  const auto ys = detail::to_doubles(a.y, "--y");
  for (double yd : ys) {
    if (yd < 0 || yd != std::floor(yd)) throw UsageError("--y values must be nonnegative integers");
    const auto s = log_score(p, static_cast<long>(yd));
    os << static_cast<long>(yd) << ',' << io::format_number(s.value) << ',' << (s.zero_mass ? 1 : 0) << '\n';
    total += s.value;
    zero = zero || s.zero_mass;
  }
  r.extra["mean_log_score"] = total / static_cast<double>(ys.size());
  r.extra["zero_mass"] = zero;
  r.csv = os.str();
  return r;
}

// ---- driver ----

inline void emit(const Result& res, const OutputOptions& o, const std::string& command,
                 const std::vector<std::string>& argv, const io::WallClock& clock, std::ostream& out) {
  io::ResultEnvelope env;
  env.command = command;
  env.argv = argv;
  env.seed = res.seed;
  env.wall_clock_seconds = clock.seconds();
  env.payload = res.extra;
  env.payload["table"] = detail::csv_to_json(res.csv);
  const std::string text = o.format == "json" ? env.dump() : res.csv;
  if (o.out.empty()) out << text;
  else io::write_atomic(o.out, text);
  if (!o.report.empty()) io::write_atomic(o.report, env.dump());
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic epidemic simulation and inference", "epistat"};
  app.set_version_flag("--version", std::string(io::version));
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  OutputOptions oo;
  const auto existing = CLI::ExistingFile;

  SimulateArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "Simulate outbreaks");
  s_sim->add_option("--model", sim.model)->check(CLI::IsMember({"gse", "reed-frost", "household"}));
  s_sim->add_option("--lambda", sim.lambda, "Contact rate");
  s_sim->add_option("--gamma", sim.gamma, "Recovery rate");
  s_sim->add_option("--n", sim.n, "Population size");
  s_sim->add_option("--latent-rate", sim.latent_rate, "Latent-period rate (SEIR)");
  s_sim->add_flag("--fixed-period", sim.fixed, "Infectious period exactly 1/gamma");
  s_sim->add_option("--replicates", sim.replicates, "Number of outbreaks");
  s_sim->add_option("--p", sim.p, "Reed-Frost transmission probability");
  s_sim->add_option("--i0", sim.i0, "Reed-Frost initial infectives");
  s_sim->add_option("--lambda-h", sim.lambda_h, "Within-household contact rate");
  s_sim->add_option("--lambda-g", sim.lambda_g, "Global contact rate");
  s_sim->add_option("--sizes", sim.sizes, "Household sizes CSV")->check(existing);
  s_sim->add_option("--household-size", sim.household_size);
  s_sim->add_option("--households", sim.households);
  s_sim->add_option("--seed", sim.seed, "Master seed");
  s_sim->add_option("--threads", sim.threads);
  add_output_options(s_sim, oo);

  EstimateArgs est;
  auto* s_est = app.add_subcommand("estimate", "Final-size, sample and pair estimators");
  s_est->add_option("mode", est.mode)->check(CLI::IsMember({"final-size", "pair", "sample"}));
  s_est->add_option("--n", est.n);
  s_est->add_option("--z", est.z);
  s_est->add_option("--n-immune", est.n_immune);
  s_est->add_option("--m", est.m);
  s_est->add_option("--zm", est.z_m);
  s_est->add_option("--k", est.k);
  s_est->add_option("--cv", est.cv, "Coefficient of variation of the infectious period");
  s_est->add_option("--input", est.input, "CSV with columns n,Z[,n_immune] or n,m,Z_m")->check(existing);
  add_output_options(s_est, oo);

  MultitypeArgs mt;
  auto* s_mt = app.add_subcommand("multitype", "Multitype R0, final size and calibration");
  s_mt->add_option("--config", mt.config, "JSON with pi, lambda, gamma")->required()->check(existing);
  s_mt->add_option("--observed", mt.observed, "Observed final fractions, comma-separated");
  s_mt->add_option("--free", mt.free, "Free parameters: contact:i:j, recovery:i, ...");
  add_output_options(s_mt, oo);

  HouseholdArgs hh;
  auto* s_hh = app.add_subcommand("household", "Household transmission MLE");
  s_hh->add_option("--data", hh.data, "household_id,event,time CSV")->required()->check(existing);
  s_hh->add_option("--sizes", hh.sizes, "household_id,size CSV")->required()->check(existing);
  s_hh->add_option("--t-obs", hh.t_obs, "End of observation (default: last event)");
  add_output_options(s_hh, oo);

  PatchArgs pa;
  auto* s_pa = app.add_subcommand("patches", "Two-patch SIR ODE");
  s_pa->add_option("--lambda", pa.p.lambda)->required();
  s_pa->add_option("--gamma", pa.p.gamma)->required();
  s_pa->add_option("--m", pa.p.m_move, "Migration rate");
  s_pa->add_option("--n", pa.p.n)->required();
  s_pa->add_option("--S1", pa.p.S1)->required();
  s_pa->add_option("--I1", pa.p.I1)->required();
  s_pa->add_option("--S2", pa.p.S2)->required();
  s_pa->add_option("--I2", pa.p.I2)->required();
  s_pa->add_option("--t-end", pa.t_end);
  s_pa->add_option("--dt", pa.dt);
  s_pa->add_option("--every", pa.every, "Write every k-th step");
  add_output_options(s_pa, oo);

  GrowthArgs gr;
  auto* s_gr = app.add_subcommand("growth-rate", "Exponential growth rate from incidence");
  s_gr->add_option("--input", gr.input, "period,count CSV")->required()->check(existing);
  s_gr->add_option("--window", gr.window, "Periods a:b (inclusive)");
  s_gr->add_option("--method", gr.method)->check(CLI::IsMember({"poisson", "lsq"}));
  s_gr->add_option("--period-length", gr.period_length);
  add_output_options(s_gr, oo);

  EulerLotkaArgs el;
  auto* s_el = app.add_subcommand("euler-lotka", "Growth rate <-> R0");
  s_el->add_option("--gen-dist", el.gen_dist, "exp:rate | fixed:T | gamma:shape,rate")->required();
  s_el->add_option("--r0", el.r0);
  s_el->add_option("--r", el.r);
  add_output_options(s_el, oo);

  IntervalArgs iv;
  auto* s_iv = app.add_subcommand("intervals", "Forward, serial and backward intervals");
  s_iv->add_option("--input", iv.input, "Event log CSV")->check(existing);
  s_iv->add_option("--n", iv.n);
  s_iv->add_option("--lambda", iv.lambda);
  s_iv->add_option("--gamma", iv.gamma);
  s_iv->add_option("--seed", iv.seed);
  s_iv->add_option("--window", iv.window, "Calendar window a:b");
  s_iv->add_option("--growth-phase", iv.growth_phase, "Cumulative-incidence fractions lo:hi");
  s_iv->add_option("--onset-delay", iv.onset_delay, "Constant infection-to-onset delay");
  add_output_options(s_iv, oo);

  AbcArgs abc;
  auto* s_abc = app.add_subcommand("abc", "ABC rejection sampler");
  s_abc->add_option("--model", abc.model)->check(CLI::IsMember({"gse", "reed-frost"}));
  s_abc->add_option("--n", abc.n)->required();
  s_abc->add_option("--i0", abc.i0);
  s_abc->add_option("--gamma", abc.gamma, "Fixed recovery rate when gamma has no prior");
  s_abc->add_option("--prior-lambda", abc.prior_lambda);
  s_abc->add_option("--prior-gamma", abc.prior_gamma);
  s_abc->add_option("--prior-p", abc.prior_p);
  s_abc->add_option("--summaries", abc.summaries, "final_size,duration,peak_incidence,peak_time");
  s_abc->add_option("--observed", abc.observed, "Observed summaries, comma-separated");
  s_abc->add_option("--observed-log", abc.observed_log, "Observed event log CSV")->check(existing);
  s_abc->add_option("--epsilon", abc.epsilon);
  s_abc->add_option("--draws", abc.draws);
  s_abc->add_option("--pilot", abc.pilot, "Pilot draws for summary scaling");
  s_abc->add_option("--bin-width", abc.bin_width);
  s_abc->add_option("--seed", abc.seed);
  s_abc->add_option("--threads", abc.threads);
  add_output_options(s_abc, oo);

  DaMcmcArgs da;
  auto* s_da = app.add_subcommand("da-mcmc", "Data-augmented MCMC from removal times");
  s_da->add_option("--input", da.input, "subject,removal_time,index CSV")->required()->check(existing);
  s_da->add_option("--n", da.n)->required();
  s_da->add_option("--prior-lambda", da.prior_lambda);
  s_da->add_option("--prior-gamma", da.prior_gamma);
  s_da->add_option("--iterations", da.iterations);
  s_da->add_option("--burn-in", da.burn_in, "Fraction discarded");
  s_da->add_option("--thin", da.thin);
  s_da->add_option("--updates", da.updates, "Infection-time updates per iteration");
  s_da->add_flag("--fixed-times", da.fixed_times, "Keep infection times at their start values");
  s_da->add_option("--seed", da.seed);
  add_output_options(s_da, oo);

  SurveilArgs sv;
  auto* s_sv = app.add_subcommand("surveil", "Farrington-type outbreak detection");
  s_sv->add_option("--input", sv.input, "unit,week,year,count CSV")->required()->check(existing);
  s_sv->add_option("--unit", sv.unit);
  s_sv->add_option("--b", sv.cfg.b, "Years of history");
  s_sv->add_option("--w", sv.cfg.w_half, "Half-window in weeks");
  s_sv->add_option("--q", sv.cfg.q, "Quantile level");
  s_sv->add_option("--min-total", sv.cfg.min_total);
  s_sv->add_option("--period", sv.cfg.period);
  s_sv->add_option("--start", sv.start, "First monitored index");
  add_output_options(s_sv, oo);

  auto add_ee = [](CLI::App* sub, EeArgs& e, bool required) {
    auto* in = sub->add_option("--input", e.input, "unit,week,year,count CSV")->check(CLI::ExistingFile);
    if (required) in->required();
    sub->add_option("--weights", e.weights, "from,to,weight CSV")->check(CLI::ExistingFile);
    sub->add_option("--harmonics", e.spec.harmonics);
    sub->add_option("--period", e.spec.period);
    sub->add_flag("--no-ar", e.no_ar);
    sub->add_flag("--neighbor", e.spec.include_neighbor);
    sub->add_flag("--shared-alpha", e.spec.shared_alpha);
    sub->add_flag("--per-unit-nu", e.per_unit_nu);
    sub->add_option("--lag", e.lag);
  };
  EeArgs ee;
  auto* s_ee = app.add_subcommand("ee-fit", "Endemic-epidemic negative binomial panel model");
  add_ee(s_ee, ee, true);
  add_output_options(s_ee, oo);

  ScoreArgs sc;
  auto* s_sc = app.add_subcommand("score", "Logarithmic score of count predictions");
  s_sc->add_option("--dist", sc.dist)->check(CLI::IsMember({"poisson", "negbin", "degenerate"}));
  s_sc->add_option("--mu", sc.mu);
  s_sc->add_option("--phi", sc.phi);
  s_sc->add_option("--value", sc.value, "Support point of the degenerate predictive");
  s_sc->add_option("--y", sc.y, "Observed counts, comma-separated");
  s_sc->add_option("--from", sc.from, "First scored period (panel mode)");
  add_ee(s_sc, sc.panel, false);
  add_output_options(s_sc, oo);

  std::vector<std::string> args;
  for (int k = 0; k < argc; ++k) args.emplace_back(argv[k]);
  io::WallClock clock;
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ExitCode::ok : ExitCode::usage;
  }

  try {
    Result res;
    CLI::App* chosen = app.get_subcommands().front();
    const std::string name = chosen->get_name();
    if (name == "simulate") res = run_simulate(sim);
    else if (name == "estimate") res = run_estimate(est);
    else if (name == "multitype") res = run_multitype(mt);
    else if (name == "household") res = run_household(hh);
    else if (name == "patches") res = run_patches(pa);
    else if (name == "growth-rate") res = run_growth(gr);
    else if (name == "euler-lotka") res = run_euler_lotka(el);
    else if (name == "intervals") res = run_intervals(iv);
    else if (name == "abc") res = run_abc(abc);
    else if (name == "da-mcmc") res = run_da_mcmc(da);
    else if (name == "surveil") res = run_surveil(sv);
    else if (name == "ee-fit") res = run_ee_fit(ee);
    else res = run_score(sc);
    emit(res, oo, name, args, clock, out);
    return ExitCode::ok;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return ExitCode::usage;
  } catch (const ConvergenceError& e) {
    err << "did not converge: " << e.what() << "\n";
    return ExitCode::convergence;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    return ExitCode::domain;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return ExitCode::domain;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return ExitCode::internal;
  }
}

}  // namespace epistat::cli
