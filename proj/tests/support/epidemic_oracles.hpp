#pragma once

#include <algorithm>
#include <cmath>
#include <tuple>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "epistat/core/event_log.hpp"
#include "epistat/inference/da_mcmc.hpp"
#include "epistat/inference/prior.hpp"

namespace oracle {

using namespace epistat;

inline RemovalData removals_of(const EventLog& log) {
  RemovalData d;
  d.n = log.n;
  const auto t_inf = infection_times(log);
  std::vector<double> rec(static_cast<std::size_t>(log.n), 0.0);
  for (const auto& e : log.events)
    if (e.kind == EventKind::recovery) rec[static_cast<std::size_t>(e.subject)] = e.time;
  for (int i = 0; i < log.n; ++i)
    if (!std::isnan(t_inf[static_cast<std::size_t>(i)])) {
      if (i == 0) d.index = d.removal_times.size();
      d.removal_times.push_back(rec[static_cast<std::size_t>(i)]);
    }
  return d;
}

// Posterior means of (lambda, gamma) for a two-case outbreak, by integrating
// the single unknown infection time against the gamma-marginalised likelihood.
inline std::pair<double, double> two_case_posterior_means(int n, double r_index, double r_other,
                                                   GammaPrior pl, GammaPrior pg) {
  auto stats = [&](double t1) {
    // Events: index infected at 0, other at t1, removals at r_index, r_other.
    struct Ev { double t; int kind; };  // 0 infection, 1 removal
    std::vector<Ev> ev{{t1, 0}, {r_index, 1}, {r_other, 1}};
    std::sort(ev.begin(), ev.end(), [](const Ev& a, const Ev& b) { return a.t < b.t; });
    double S = n - 1, I = 1, t = 0, A = 0, B = 0, press = 0;
    for (const auto& e : ev) {
      A += S * I / n * (e.t - t);
      B += I * (e.t - t);
      t = e.t;
      if (e.kind == 0) {
        press = S * I / n;
        --S;
        ++I;
      } else {
        --I;
      }
    }
    return std::tuple<double, double, double>{A, B, press};
  };
  auto weight = [&](double t1) {
    const auto [A, B, press] = stats(t1);
    return press * std::pow(pl.rate + A, -(pl.shape + 1)) * std::pow(pg.rate + B, -(pg.shape + 2));
  };
  const double hi = std::min(r_index, r_other);
  using Q = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double z = Q::integrate(weight, 0.0, hi, 15, 1e-12);
  const double ml = Q::integrate([&](double t1) {
    return weight(t1) * (pl.shape + 1) / (pl.rate + std::get<0>(stats(t1)));
  }, 0.0, hi, 15, 1e-12);
  const double mg = Q::integrate([&](double t1) {
    return weight(t1) * (pg.shape + 2) / (pg.rate + std::get<1>(stats(t1)));
  }, 0.0, hi, 15, 1e-12);
  return {ml / z, mg / z};
}

}  // namespace oracle
