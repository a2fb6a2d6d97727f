#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>
#include <vector>

#include "epistat/core/error.hpp"

namespace epistat {

/// k-type SIR: lambda(i, j)/n is the rate at which an infectious type-i
/// individual infects a given susceptible type-j individual; pi holds the
/// community fractions and gamma the per-type recovery rates.
struct MultitypeConfig {
  Eigen::VectorXd pi;
  Eigen::MatrixXd lambda;
  Eigen::VectorXd gamma;

  int k() const noexcept { return static_cast<int>(pi.size()); }

  void validate() const {
    const auto kk = pi.size();
    detail::require(kk >= 1, "need at least one type");
    detail::require(lambda.rows() == kk && lambda.cols() == kk && gamma.size() == kk,
                    "dimension mismatch between pi, lambda and gamma");
    detail::require((pi.array() > 0.0).all(), "type fractions must be positive");
    detail::require(std::abs(pi.sum() - 1.0) < 1e-9, "type fractions must sum to 1");
    detail::require((lambda.array() >= 0.0).all(), "contact rates must be >= 0");
    detail::require((gamma.array() > 0.0).all(), "recovery rates must be > 0");
  }

  /// m(i, j) = lambda(i, j) pi_j / gamma_i.
  Eigen::MatrixXd next_generation_matrix() const {
    Eigen::MatrixXd m = lambda;
    for (int i = 0; i < k(); ++i)
      for (int j = 0; j < k(); ++j) m(i, j) = lambda(i, j) * pi(j) / gamma(i);
    return m;
  }
};

/// Perron root of a nonnegative square matrix by power iteration on M + I
/// (the shift makes irreducible periodic matrices primitive).
inline double perron_root(const Eigen::MatrixXd& m, double tol = 1e-14, int max_iter = 200000) {
  const auto k = m.rows();
  const Eigen::MatrixXd shifted = m + Eigen::MatrixXd::Identity(k, k);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(k, 1.0 / std::sqrt(static_cast<double>(k)));
  double rho = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd y = shifted * x;
    rho = x.dot(y);  // Rayleigh quotient, x normalized
    const double resid = (y - rho * x).lpNorm<Eigen::Infinity>();
    if (resid <= tol * rho) return rho - 1.0;
    x = y / y.norm();
  }
  // Defective dominant eigenvalues converge only algebraically; finish with a
  // dense eigen-decomposition.
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  double best = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    best = std::max(best, std::abs(es.eigenvalues()(i)));
  return best;
}

/// Largest eigenvalue of the next-generation matrix.
inline double ngm_r0(const MultitypeConfig& cfg) {
  cfg.validate();
  return perron_root(cfg.next_generation_matrix());
}

namespace detail {

// exponent_j = sum_i lambda_ij pi_i tau_i / gamma_i  ->  A tau with A(j, i).
inline Eigen::MatrixXd final_size_exponent_matrix(const MultitypeConfig& cfg) {
  const int k = cfg.k();
  Eigen::MatrixXd a(k, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i) a(j, i) = cfg.lambda(i, j) * cfg.pi(i) / cfg.gamma(i);
  return a;
}

}  // namespace detail

/// Residual 1 - tau_j - exp(-sum_i lambda_ij pi_i tau_i / gamma_i) per type.
inline Eigen::VectorXd multitype_final_size_residual(const MultitypeConfig& cfg,
                                                     const Eigen::VectorXd& tau) {
  const Eigen::MatrixXd a = detail::final_size_exponent_matrix(cfg);
  return (Eigen::VectorXd::Ones(tau.size()) - tau) - (-(a * tau)).array().exp().matrix();
}

/// Largest solution of the multitype final-size system; the zero vector when
/// the next-generation R0 is at most 1.
inline Eigen::VectorXd multitype_final_size_solve(const MultitypeConfig& cfg,
                                                  double tol = 1e-12) {
  cfg.validate();
  const int k = cfg.k();
  if (ngm_r0(cfg) <= 1.0) return Eigen::VectorXd::Zero(k);
  const Eigen::MatrixXd a = detail::final_size_exponent_matrix(cfg);
  auto map = [&](const Eigen::VectorXd& t) -> Eigen::VectorXd {
    return (Eigen::VectorXd::Ones(k).array() - (-(a * t)).array().exp()).matrix();
  };

  // The map is monotone, so iterating from the all-ones vector decreases to
  // the largest fixed point. Slow near criticality; Newton finishes the job.
  Eigen::VectorXd tau = Eigen::VectorXd::Ones(k);
  double resid = 0.0;
  for (int it = 0; it < 20000; ++it) {
    const Eigen::VectorXd next = map(tau);
    resid = (next - tau).lpNorm<Eigen::Infinity>();
    tau = next;
    if (resid < 1e-6) break;
  }
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd e = (-(a * tau)).array().exp().matrix();
    const Eigen::VectorXd f = tau - Eigen::VectorXd::Ones(k) + e;
    resid = f.lpNorm<Eigen::Infinity>();
    if (resid < tol) break;
    const Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(k, k) - e.asDiagonal() * a;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) break;
    Eigen::VectorXd step = lu.solve(f);
    tau = (tau - step).cwiseMax(0.0).cwiseMin(1.0);
  }
  resid = multitype_final_size_residual(cfg, tau).lpNorm<Eigen::Infinity>();
  if (!(resid < 1e-10))
    throw ConvergenceError("multitype final-size iteration did not converge", resid);
  return tau;
}

/// One free parameter of a calibration template.
struct FreeParameter {
  enum class Kind {
    contact_rate,          // lambda(i, j)
    recovery_rate,         // gamma(i)
    infectivity_scale,     // multiplies row i of the template lambda (alpha_i)
    susceptibility_scale,  // multiplies column j of the template lambda (beta_j)
  };
  Kind kind = Kind::contact_rate;
  int i = 0;
  int j = 0;

  static FreeParameter contact(int i, int j) { return {Kind::contact_rate, i, j}; }
  static FreeParameter recovery(int i) { return {Kind::recovery_rate, i, 0}; }
  static FreeParameter infectivity(int i) { return {Kind::infectivity_scale, i, 0}; }
  static FreeParameter susceptibility(int j) { return {Kind::susceptibility_scale, 0, j}; }
};

/// Template config whose listed parameters are to be fitted; everything else
/// is fixed by the caller. Scale parameters multiply the template entries.
struct CalibrationTemplate {
  MultitypeConfig base;
  std::vector<FreeParameter> free;

  MultitypeConfig apply(const Eigen::VectorXd& values) const {
    MultitypeConfig cfg = base;
    for (std::size_t p = 0; p < free.size(); ++p) {
      const auto& fp = free[p];
      const double v = values(static_cast<Eigen::Index>(p));
      switch (fp.kind) {
        case FreeParameter::Kind::contact_rate: cfg.lambda(fp.i, fp.j) = v; break;
        case FreeParameter::Kind::recovery_rate: cfg.gamma(fp.i) = v; break;
        case FreeParameter::Kind::infectivity_scale: cfg.lambda.row(fp.i) *= v; break;
        case FreeParameter::Kind::susceptibility_scale: cfg.lambda.col(fp.j) *= v; break;
      }
    }
    return cfg;
  }

  Eigen::VectorXd initial_values() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(free.size()));
    for (std::size_t p = 0; p < free.size(); ++p) {
      const auto& fp = free[p];
      double x = 1.0;
      if (fp.kind == FreeParameter::Kind::contact_rate) x = base.lambda(fp.i, fp.j);
      if (fp.kind == FreeParameter::Kind::recovery_rate) x = base.gamma(fp.i);
      v(static_cast<Eigen::Index>(p)) = x > 0.0 ? x : 1.0;
    }
    return v;
  }
};

struct CalibrationResult {
  MultitypeConfig fitted;
  Eigen::VectorXd values;
  double r0 = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

/// Fits the k free parameters so that the observed per-type final fractions
/// solve the final-size equations exactly.
inline CalibrationResult multitype_calibrate(const Eigen::VectorXd& observed_tau,
                                             const CalibrationTemplate& tmpl) {
  tmpl.base.validate();
  const int k = tmpl.base.k();
  detail::require(observed_tau.size() == k, "observed fractions must have one entry per type");
  detail::require(static_cast<int>(tmpl.free.size()) == k,
                  "calibration needs exactly k free parameters");
  detail::require((observed_tau.array() >= 0.0).all() && (observed_tau.array() < 1.0).all(),
                  "observed fractions must lie in [0, 1)");
  if ((observed_tau.array() == 0.0).all())
    throw DomainError("observed final fractions are all zero: outbreak subcritical, "
                      "parameters unidentifiable");
  for (const auto& fp : tmpl.free) {
    const int hi = fp.kind == FreeParameter::Kind::susceptibility_scale ? fp.j : fp.i;
    detail::require(hi >= 0 && hi < k && fp.j >= 0 && fp.j < k, "free parameter index out of range");
  }

  // h_j(theta) = -log(1 - tau_j) - sum_i lambda_ij pi_i tau_i / gamma_i, solved in log theta.
  const Eigen::VectorXd target = -(Eigen::VectorXd::Ones(k) - observed_tau).array().log().matrix();
  auto residual = [&](const Eigen::VectorXd& log_theta) -> Eigen::VectorXd {
    const MultitypeConfig cfg = tmpl.apply(log_theta.array().exp().matrix());
    return target - detail::final_size_exponent_matrix(cfg) * observed_tau;
  };

  Eigen::VectorXd u = tmpl.initial_values().array().log().matrix();
  Eigen::VectorXd h = residual(u);
  double norm = h.lpNorm<Eigen::Infinity>();
  int it = 0;
  for (; it < 200 && norm >= 1e-13; ++it) {
    Eigen::MatrixXd jac(k, k);
    for (int p = 0; p < k; ++p) {
      const double step = 1e-6 * std::max(1.0, std::abs(u(p)));
      Eigen::VectorXd up = u, dn = u;
      up(p) += step;
      dn(p) -= step;
      jac.col(p) = (residual(up) - residual(dn)) / (2.0 * step);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible())
      throw ConvergenceError("multitype calibration: singular Jacobian (free parameters are not "
                             "identifiable from the observed fractions)",
                             norm);
    const Eigen::VectorXd step = lu.solve(h);
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      const Eigen::VectorXd cand = u - t * step;
      const Eigen::VectorXd hc = residual(cand);
      const double nc = hc.lpNorm<Eigen::Infinity>();
      if (std::isfinite(nc) && nc < norm) {
        u = cand;
        h = hc;
        norm = nc;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  if (!(norm < 1e-8))
    throw ConvergenceError("multitype calibration did not converge", norm);

  CalibrationResult out;
  out.values = u.array().exp().matrix();
  out.fitted = tmpl.apply(out.values);
  out.r0 = ngm_r0(out.fitted);
  out.residual = norm;
  out.iterations = it;
  return out;
}

}  // namespace epistat
