#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "epistat/core/error.hpp"
#include "epistat/core/event_log.hpp"
#include "epistat/core/gse.hpp"
#include "epistat/core/rng.hpp"
#include "epistat/final_size/estimators.hpp"
#include "epistat/numeric/optimize.hpp"

namespace epistat {

/// Each infective infects each susceptible of its own household at rate
/// lambda_H and each susceptible in the population at rate lambda_G / n.
struct HouseholdParams {
  double lambda_H = 0.0;
  double lambda_G = 0.0;
  double gamma = 1.0;
  std::vector<int> sizes;

  int n() const { return std::accumulate(sizes.begin(), sizes.end(), 0); }

  void validate() const {
    detail::require(lambda_H >= 0.0 && lambda_G >= 0.0, "contact rates must be >= 0");
    detail::require(gamma > 0.0, "gamma must be > 0");
    detail::require(!sizes.empty(), "need at least one household");
    detail::require(std::all_of(sizes.begin(), sizes.end(), [](int s) { return s >= 1; }),
                    "household sizes must be >= 1");
    detail::require(n() >= 2, "population size must be >= 2");
  }
};

/// Event log plus the household of every individual. Household h holds the
/// contiguous ids [offset_h, offset_h + size_h).
struct HouseholdEventLog {
  EventLog log;
  std::vector<int> household_of;
  std::vector<int> sizes;
};

inline std::vector<int> household_membership(const std::vector<int>& sizes) {
  std::vector<int> of;
  for (int h = 0; h < static_cast<int>(sizes.size()); ++h)
    of.insert(of.end(), static_cast<std::size_t>(sizes[static_cast<std::size_t>(h)]), h);
  return of;
}

/// Exact household-epidemic simulation with one uniformly placed index case
/// infected at time 0 and exponential infectious periods.
inline HouseholdEventLog simulate_households(const HouseholdParams& p, std::uint64_t seed) {
  p.validate();
  Rng rng(seed);
  const int n = p.n();
  const int households = static_cast<int>(p.sizes.size());
  HouseholdEventLog out{{n, {}, 0.0}, household_membership(p.sizes), p.sizes};
  const auto& hh = out.household_of;

  detail::IdPool susceptible(static_cast<std::size_t>(n));
  detail::IdPool infectious(static_cast<std::size_t>(n));
  detail::IdPool infected_households(static_cast<std::size_t>(households));
  std::vector<std::vector<int>> hh_sus(static_cast<std::size_t>(households));
  std::vector<std::vector<int>> hh_inf(static_cast<std::size_t>(households));
  for (int id = 0; id < n; ++id) {
    susceptible.insert(id);
    hh_sus[static_cast<std::size_t>(hh[static_cast<std::size_t>(id)])].push_back(id);
  }
  // sum over households of S_h * I_h
  double within_pairs = 0.0;

  auto erase_value = [](std::vector<int>& v, int x) {
    auto it = std::find(v.begin(), v.end(), x);
    *it = v.back();
    v.pop_back();
  };
  double t = 0.0;
  auto infect = [&](int target, int source) {
    const int h = hh[static_cast<std::size_t>(target)];
    auto& s = hh_sus[static_cast<std::size_t>(h)];
    auto& i = hh_inf[static_cast<std::size_t>(h)];
    within_pairs -= static_cast<double>(s.size() * i.size());
    susceptible.erase(target);
    erase_value(s, target);
    if (i.empty()) infected_households.insert(h);
    i.push_back(target);
    infectious.insert(target);
    within_pairs += static_cast<double>(s.size() * i.size());
    out.log.events.push_back({t, EventKind::infection, target, source});
  };
  auto recover = [&](int id) {
    const int h = hh[static_cast<std::size_t>(id)];
    auto& s = hh_sus[static_cast<std::size_t>(h)];
    auto& i = hh_inf[static_cast<std::size_t>(h)];
    within_pairs -= static_cast<double>(s.size() * i.size());
    erase_value(i, id);
    if (i.empty()) infected_households.erase(h);
    infectious.erase(id);
    within_pairs += static_cast<double>(s.size() * i.size());
    out.log.events.push_back({t, EventKind::recovery, id, no_infector});
  };

  infect(static_cast<int>(rng.index(static_cast<std::size_t>(n))), no_infector);
  const double global_per_capita = p.lambda_G / static_cast<double>(n);
  while (!infectious.empty()) {
    const double I = static_cast<double>(infectious.size());
    const double rate_within = p.lambda_H * within_pairs;
    const double rate_global = global_per_capita * static_cast<double>(susceptible.size()) * I;
    const double rate_recover = p.gamma * I;
    const double total = rate_within + rate_global + rate_recover;
    t += rng.exponential(total);
    const double u = rng.uniform() * total;
    if (u < rate_within) {
      // Household h is chosen with probability proportional to S_h I_h.
      double target_mass = rng.uniform() * within_pairs;
      int chosen = -1;
      for (std::size_t k = 0; k < infected_households.size(); ++k) {
        const int h = infected_households.pick_at(k);
        const double w = static_cast<double>(hh_sus[static_cast<std::size_t>(h)].size() *
                                             hh_inf[static_cast<std::size_t>(h)].size());
        if (w == 0.0) continue;
        chosen = h;
        if (target_mass < w) break;
        target_mass -= w;
      }
      const auto& s = hh_sus[static_cast<std::size_t>(chosen)];
      const auto& i = hh_inf[static_cast<std::size_t>(chosen)];
      infect(s[rng.index(s.size())], i[rng.index(i.size())]);
    } else if (u < rate_within + rate_global) {
      infect(susceptible.pick(rng), infectious.pick(rng));
    } else {
      recover(infectious.pick(rng));
    }
  }
  out.log.end_time = t;
  return out;
}

/// Observed household outbreak: infection and recovery times per household,
/// with the externally seeded case(s) marked as index.
struct HouseholdRecord {
  enum class Kind : std::uint8_t { index, infection, recovery };
  int household = 0;
  Kind kind = Kind::infection;
  double time = 0.0;

  friend bool operator==(const HouseholdRecord&, const HouseholdRecord&) = default;
};

struct HouseholdOutbreakData {
  std::vector<int> sizes;
  std::vector<HouseholdRecord> records;  // sorted by time
  double t_obs = 0.0;

  int n() const { return std::accumulate(sizes.begin(), sizes.end(), 0); }
};

inline HouseholdOutbreakData to_outbreak_data(const HouseholdEventLog& hl) {
  HouseholdOutbreakData d{hl.sizes, {}, hl.log.end_time};
  for (const Event& e : hl.log.events) {
    HouseholdRecord r{hl.household_of[static_cast<std::size_t>(e.subject)],
                      HouseholdRecord::Kind::recovery, e.time};
    if (e.kind == EventKind::infection)
      r.kind = e.infector == no_infector ? HouseholdRecord::Kind::index
                                         : HouseholdRecord::Kind::infection;
    d.records.push_back(r);
  }
  return d;
}

/// The household log-likelihood depends on the data only through these
/// quantities: at each non-index infection, a = S_i I_i and b = S_i I / n
/// just before it, plus the exact integrals of sum_i S_i I_i and S I / n.
struct HouseholdSufficientStats {
  std::vector<double> within;  // a_k
  std::vector<double> global;  // b_k
  double within_integral = 0.0;
  double global_integral = 0.0;
  int infections() const { return static_cast<int>(within.size()); }
};

inline HouseholdSufficientStats household_sufficient_stats(const HouseholdOutbreakData& d,
                                                           int n) {
  detail::require(n >= 1, "population size must be positive");
  const auto H = d.sizes.size();
  std::vector<long> S(d.sizes.begin(), d.sizes.end());
  std::vector<long> I(H, 0);
  long s_tot = std::accumulate(S.begin(), S.end(), 0L);
  long i_tot = 0;
  double pairs = 0.0;
  double last = 0.0;
  const double nn = static_cast<double>(n);
  HouseholdSufficientStats st;
  auto advance = [&](double to) {
    const double dt = to - last;
    st.within_integral += pairs * dt;
    st.global_integral += static_cast<double>(s_tot) * static_cast<double>(i_tot) / nn * dt;
    last = to;
  };
  for (std::size_t k = 0; k < d.records.size(); ++k) {
    const auto& r = d.records[k];
    const std::size_t line = k + 1;
    if (r.household < 0 || static_cast<std::size_t>(r.household) >= H)
      throw DataError("household id out of range", line);
    if (!(r.time >= last)) throw DataError("household records must be sorted by time", line);
    if (r.time > d.t_obs) throw DataError("record after the observation horizon", line);
    advance(r.time);
    const auto h = static_cast<std::size_t>(r.household);
    pairs -= static_cast<double>(S[h] * I[h]);
    if (r.kind == HouseholdRecord::Kind::recovery) {
      if (I[h] <= 0) throw DataError("recovery in a household without infectives", line);
      --I[h];
      --i_tot;
    } else {
      if (S[h] <= 0) throw DataError("infection in a household without susceptibles", line);
      if (r.kind == HouseholdRecord::Kind::infection) {
        st.within.push_back(static_cast<double>(S[h] * I[h]));
        st.global.push_back(static_cast<double>(S[h]) * static_cast<double>(i_tot) / nn);
      }
      --S[h];
      ++I[h];
      --s_tot;
      ++i_tot;
    }
    pairs += static_cast<double>(S[h] * I[h]);
  }
  advance(d.t_obs);
  return st;
}

struct LogLikelihood {
  double value = 0.0;
  bool impossible = false;  // some observed event had zero intensity
};

inline LogLikelihood household_loglik(const HouseholdSufficientStats& st, double lambda_H,
                                      double lambda_G) {
  detail::require(lambda_H >= 0.0 && lambda_G >= 0.0, "contact rates must be >= 0");
  double ll = -(lambda_H * st.within_integral + lambda_G * st.global_integral);
  for (std::size_t k = 0; k < st.within.size(); ++k) {
    const double intensity = lambda_H * st.within[k] + lambda_G * st.global[k];
    if (!(intensity > 0.0)) return {-std::numeric_limits<double>::infinity(), true};
    ll += std::log(intensity);
  }
  return {ll, false};
}

/// Log-likelihood of observed household infection times; the index case is
/// conditioned on and contributes no event term.
inline LogLikelihood household_loglik(const HouseholdOutbreakData& d, double lambda_H,
                                      double lambda_G, int n) {
  return household_loglik(household_sufficient_stats(d, n), lambda_H, lambda_G);
}

inline LogLikelihood household_loglik(const HouseholdOutbreakData& d, double lambda_H,
                                      double lambda_G) {
  return household_loglik(d, lambda_H, lambda_G, d.n());
}

struct HouseholdFit {
  Estimate lambda_H;
  Estimate lambda_G;
  double loglik = 0.0;
  bool boundary_H = false;  // lambda_H estimated as 0
  bool boundary_G = false;  // lambda_G estimated as 0
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
};

/// Maximum-likelihood (lambda_H, lambda_G) over the nonnegative quadrant.
inline HouseholdFit household_mle(const HouseholdSufficientStats& st) {
  const int K = st.infections();
  if (K < 1) throw DomainError("household MLE needs at least one non-index infection");
  const double A = st.within_integral;
  const double B = st.global_integral;

  auto negll = [&](double h, double g) {
    const auto r = household_loglik(st, h, g);
    return r.impossible ? std::numeric_limits<double>::infinity() : -r.value;
  };
  numeric::Objective f_log = [&](const Eigen::VectorXd& u) {
    return negll(std::exp(u(0)), std::exp(u(1)));
  };

  struct Candidate {
    double h, g, nll;
  };
  std::vector<Candidate> candidates;

  // Interior: BFGS in log space from three deterministic starts.
  const double scale = static_cast<double>(K) / std::max(A + B, 1e-300);
  const double starts[3][2] = {{scale, scale}, {2.0 * scale, 0.25 * scale},
                               {0.25 * scale, 2.0 * scale}};
  for (const auto& s0 : starts) {
    Eigen::VectorXd u(2);
    u << std::log(s0[0]), std::log(s0[1]);
    if (!std::isfinite(f_log(u))) continue;
    numeric::MinimizeOptions opts;
    opts.grad_tol = 1e-9;
    const auto res = numeric::minimize_bfgs(f_log, u, opts);
    if (std::isfinite(res.value))
      candidates.push_back({std::exp(res.x(0)), std::exp(res.x(1)), res.value});
  }
  // Boundaries, where the one-dimensional maximizer is K / integral.
  Candidate only_global{0.0, B > 0.0 ? K / B : 0.0, 0.0};
  only_global.nll = B > 0.0 ? negll(0.0, only_global.g) : std::numeric_limits<double>::infinity();
  Candidate only_within{A > 0.0 ? K / A : 0.0, 0.0, 0.0};
  only_within.nll = A > 0.0 ? negll(only_within.h, 0.0) : std::numeric_limits<double>::infinity();

  Candidate best{0.0, 0.0, std::numeric_limits<double>::infinity()};
  for (const auto& c : candidates)
    if (c.nll < best.nll) best = c;
  HouseholdFit fit;
  const double tie = 1e-9 * std::max(1.0, std::abs(best.nll));
  if (std::isfinite(only_global.nll) && only_global.nll <= best.nll + tie &&
      only_global.nll <= only_within.nll) {
    best = only_global;
    fit.boundary_H = true;
  } else if (std::isfinite(only_within.nll) && only_within.nll <= best.nll + tie) {
    best = only_within;
    fit.boundary_G = true;
  }
  if (!std::isfinite(best.nll))
    throw ConvergenceError("household MLE: no finite likelihood found", best.nll);

  // Observed information by finite differences on the natural scale.
  numeric::Objective f_nat = [&](const Eigen::VectorXd& x) {
    return negll(std::max(x(0), 0.0), std::max(x(1), 0.0));
  };
  fit.loglik = -best.nll;
  if (!fit.boundary_H && !fit.boundary_G) {
    Eigen::VectorXd x(2);
    x << best.h, best.g;
    const double step = 1e-4;
    Eigen::Matrix2d info;
    const Eigen::VectorXd rel = x * step;
    const double f0 = f_nat(x);
    for (int i = 0; i < 2; ++i) {
      Eigen::VectorXd up = x, dn = x;
      up(i) += rel(i);
      dn(i) -= rel(i);
      info(i, i) = (f_nat(up) - 2.0 * f0 + f_nat(dn)) / (rel(i) * rel(i));
    }
    {
      Eigen::VectorXd pp = x, pm = x, mp = x, mm = x;
      pp(0) += rel(0); pp(1) += rel(1);
      pm(0) += rel(0); pm(1) -= rel(1);
      mp(0) -= rel(0); mp(1) += rel(1);
      mm(0) -= rel(0); mm(1) -= rel(1);
      info(0, 1) = info(1, 0) = (f_nat(pp) - f_nat(pm) - f_nat(mp) + f_nat(mm)) / (4.0 * rel(0) * rel(1));
    }
    fit.covariance = info.inverse();
  } else {
    const int free = fit.boundary_H ? 1 : 0;
    Eigen::VectorXd x(2);
    x << best.h, best.g;
    const double h = 1e-4 * x(free);
    Eigen::VectorXd up = x, dn = x;
    up(free) += h;
    dn(free) -= h;
    const double info = (f_nat(up) - 2.0 * f_nat(x) + f_nat(dn)) / (h * h);
    fit.covariance(free, free) = 1.0 / info;
  }
  fit.lambda_H = {best.h, std::sqrt(std::max(fit.covariance(0, 0), 0.0)),
                  fit.boundary_H ? "household_mle_boundary" : "household_mle"};
  fit.lambda_G = {best.g, std::sqrt(std::max(fit.covariance(1, 1), 0.0)),
                  fit.boundary_G ? "household_mle_boundary" : "household_mle"};
  return fit;
}

inline HouseholdFit household_mle(const HouseholdOutbreakData& d) {
  return household_mle(household_sufficient_stats(d, d.n()));
}

inline constexpr int max_enumerated_household = 5;

/// Exact final-size distribution of a single household with one initial
/// infective, exponential infectious periods and no outside infection.
/// `p_pair` = lambda_H / (lambda_H + gamma), the chance an infective infects a
/// given housemate. Entry z is P(Z = z), z = 0..size.
inline std::vector<double> household_final_size_enum(int size, double p_pair) {
  detail::require(size >= 1, "household size must be >= 1");
  if (size > max_enumerated_household)
    throw DomainError("household enumeration is capped at size " +
                      std::to_string(max_enumerated_household));
  detail::require(p_pair >= 0.0 && p_pair <= 1.0, "pair probability must lie in [0, 1]");
  std::vector<double> dist(static_cast<std::size_t>(size) + 1, 0.0);
  if (p_pair == 1.0) {
    dist[static_cast<std::size_t>(size)] = 1.0;
    return dist;
  }
  const double ratio = p_pair / (1.0 - p_pair);  // lambda_H / gamma
  // prob[s][i]: probability the embedded jump chain visits (s, i).
  const auto N = static_cast<std::size_t>(size) + 1;
  std::vector<std::vector<double>> prob(N, std::vector<double>(N + 1, 0.0));
  prob[N - 2][1] = 1.0;
  // Every jump lowers s or i, so sweep s downward and i downward within s.
  for (int s = size - 1; s >= 0; --s) {
    for (int i = size - s; i >= 0; --i) {
      const double pr = prob[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)];
      if (pr == 0.0) continue;
      if (i == 0) {
        dist[static_cast<std::size_t>(size - s)] += pr;
        continue;
      }
      const double infect = ratio * s / (ratio * s + 1.0);
      if (s > 0) prob[static_cast<std::size_t>(s - 1)][static_cast<std::size_t>(i + 1)] += pr * infect;
      prob[static_cast<std::size_t>(s)][static_cast<std::size_t>(i - 1)] += pr * (1.0 - infect);
    }
  }
  return dist;
}

}  // namespace epistat
