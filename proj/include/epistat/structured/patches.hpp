#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "epistat/core/error.hpp"

namespace epistat {

/// Two-patch SIR where S and I move between patches at rate m_move and
/// infection in each patch happens at rate lambda S_i I_i / n.
struct PatchParams {
  double lambda = 0.0;
  double gamma = 1.0;
  double m_move = 0.0;
  double n = 1.0;
  double S1 = 0.0, I1 = 0.0, S2 = 0.0, I2 = 0.0;

  void validate() const {
    detail::require(lambda >= 0.0 && gamma >= 0.0 && m_move >= 0.0, "rates must be >= 0");
    detail::require(n > 0.0, "population size must be > 0");
    detail::require(S1 >= 0.0 && I1 >= 0.0 && S2 >= 0.0 && I2 >= 0.0,
                    "initial state components must be >= 0");
  }
};

struct PatchState {
  double t = 0.0;
  double S1 = 0.0, I1 = 0.0, R1 = 0.0, S2 = 0.0, I2 = 0.0, R2 = 0.0;

  double total() const { return S1 + I1 + R1 + S2 + I2 + R2; }
};

namespace detail {

// Classical fixed-step RK4 over a small state array.
template <std::size_t N, class Rhs>
std::array<double, N> rk4_step(const std::array<double, N>& y, double dt, Rhs&& rhs) {
  auto axpy = [](const std::array<double, N>& a, double h, const std::array<double, N>& b) {
    std::array<double, N> r{};
    for (std::size_t i = 0; i < N; ++i) r[i] = a[i] + h * b[i];
    return r;
  };
  const auto k1 = rhs(y);
  const auto k2 = rhs(axpy(y, 0.5 * dt, k1));
  const auto k3 = rhs(axpy(y, 0.5 * dt, k2));
  const auto k4 = rhs(axpy(y, dt, k3));
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i)
    out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

inline long step_count(double t_end, double dt) {
  detail::require(dt > 0.0, "dt must be > 0");
  detail::require(t_end >= dt, "t_end must be >= dt");
  return std::lround(t_end / dt);
}

}  // namespace detail

/// RK4 integration of the two-patch system, one output row per step
/// (starting with t = 0). R_i accumulates gamma I_i.
inline std::vector<PatchState> simulate_two_patch(const PatchParams& p, double t_end, double dt) {
  p.validate();
  const long steps = detail::step_count(t_end, dt);
  auto rhs = [&p](const std::array<double, 6>& y) {
    const double S1 = y[0], I1 = y[1], S2 = y[3], I2 = y[4];
    const double inf1 = p.lambda * S1 * I1 / p.n;
    const double inf2 = p.lambda * S2 * I2 / p.n;
    return std::array<double, 6>{
        -inf1 + p.m_move * (S2 - S1),
        inf1 - p.gamma * I1 + p.m_move * (I2 - I1),
        p.gamma * I1,
        -inf2 + p.m_move * (S1 - S2),
        inf2 - p.gamma * I2 + p.m_move * (I1 - I2),
        p.gamma * I2,
    };
  };
  std::array<double, 6> y{p.S1, p.I1, 0.0, p.S2, p.I2, 0.0};
  std::vector<PatchState> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back({0.0, y[0], y[1], y[2], y[3], y[4], y[5]});
  for (long k = 1; k <= steps; ++k) {
    y = detail::rk4_step(y, dt, rhs);
    out.push_back({static_cast<double>(k) * dt, y[0], y[1], y[2], y[3], y[4], y[5]});
  }
  return out;
}

struct SirOdeState {
  double t = 0.0, S = 0.0, I = 0.0, R = 0.0;
};

/// Single-population SIR ODE dS = -lambda S I / n, dI = lambda S I / n - gamma I.
inline std::vector<SirOdeState> simulate_sir_ode(double lambda, double gamma, double n, double S0,
                                                 double I0, double t_end, double dt) {
  detail::require(n > 0.0, "population size must be > 0");
  const long steps = detail::step_count(t_end, dt);
  auto rhs = [=](const std::array<double, 3>& y) {
    const double inf = lambda * y[0] * y[1] / n;
    return std::array<double, 3>{-inf, inf - gamma * y[1], gamma * y[1]};
  };
  std::array<double, 3> y{S0, I0, 0.0};
  std::vector<SirOdeState> out{{0.0, S0, I0, 0.0}};
  for (long k = 1; k <= steps; ++k) {
    y = detail::rk4_step(y, dt, rhs);
    out.push_back({static_cast<double>(k) * dt, y[0], y[1], y[2]});
  }
  return out;
}

/// Gravity coupling between communities: size n_k, exponents tau1 (target
/// size), tau2 (source infectives) and rho (distance), scaled by theta.
struct GravityConfig {
  double theta = 1.0;
  double tau1 = 1.0;
  double tau2 = 1.0;
  double rho = 1.0;
  std::vector<double> sizes;                   // n_k
  std::vector<std::vector<double>> distances;  // d_jk, symmetric, diagonal unused

  void validate() const {
    detail::require(theta > 0.0, "gravity constant must be > 0");
    detail::require(tau1 > 0.0 && tau2 > 0.0 && rho > 0.0, "gravity exponents must be > 0");
    detail::require(distances.size() == sizes.size(), "distance matrix must match community count");
    for (double s : sizes) detail::require(s >= 0.0, "community sizes must be >= 0");
  }
};

/// Force of infection exerted by I_j infectives in community j on community k.
inline double gravity_force(const GravityConfig& cfg, double infectives_j, std::size_t j,
                            std::size_t k) {
  cfg.validate();
  detail::require(j < cfg.sizes.size() && k < cfg.sizes.size(), "community index out of range");
  detail::require(cfg.distances[j].size() == cfg.sizes.size(), "distance matrix must be square");
  detail::require(infectives_j >= 0.0, "infective count must be >= 0");
  const double d = cfg.distances[j][k];
  if (!(d > 0.0)) throw DomainError("gravity force needs a positive distance d_jk");
  return cfg.theta * std::pow(cfg.sizes[k], cfg.tau1) * std::pow(infectives_j, cfg.tau2) /
         std::pow(d, cfg.rho);
}

}  // namespace epistat
