#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "epistat/core/error.hpp"
#include "epistat/core/rng.hpp"
#include "epistat/numeric/optimize.hpp"
#include "epistat/surveillance/negbin.hpp"

namespace epistat {

/// m units by T periods of counts. weights(j, i) is the weight of unit j's
/// counts in unit i's neighbourhood term.
struct CountPanel {
  std::vector<std::vector<long>> y;  // y[i][t]
  std::vector<int> week;             // optional period metadata
  std::vector<int> year;
  std::vector<std::string> labels;  // optional unit names
  std::optional<Eigen::MatrixXd> weights;
  int lag = 1;

  std::size_t units() const noexcept { return y.size(); }
  std::size_t periods() const noexcept { return y.empty() ? 0 : y.front().size(); }

  void validate() const {
    detail::require(!y.empty(), "panel has no units");
    const auto T = periods();
    for (const auto& row : y) {
      detail::require(row.size() == T, "every unit needs the same number of periods");
      for (long v : row) detail::require(v >= 0, "counts must be >= 0");
    }
    detail::require(lag >= 1, "lag must be >= 1");
    detail::require(week.empty() || week.size() == T, "week metadata length mismatch");
    detail::require(year.empty() || year.size() == T, "year metadata length mismatch");
    detail::require(labels.empty() || labels.size() == units(), "one label per unit");
    if (weights) {
      const auto m = static_cast<Eigen::Index>(units());
      detail::require(weights->rows() == m && weights->cols() == m, "weight matrix must be m x m");
      detail::require((weights->array() >= 0.0).all(), "weights must be >= 0");
      for (Eigen::Index i = 0; i < m; ++i)
        detail::require((*weights)(i, i) == 0.0, "weight matrix must have a zero diagonal");
    }
  }
};

struct EEModelSpec {
  int harmonics = 1;      // S
  double period = 52.0;   // omega_s = 2 pi s / period
  bool include_ar = true;
  bool include_neighbor = false;
  bool shared_alpha = false;
  bool shared_nu = true;

  void validate() const {
    detail::require(harmonics >= 0, "number of harmonics must be >= 0");
    detail::require(period > 0.0, "seasonal period must be > 0");
  }
};

/// Natural-scale parameters. nu is the neighbourhood coefficient.
struct EEParams {
  double lambda_ar = 0.0;
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> delta;
  std::vector<double> nu;
  double phi = 0.0;
};

/// Flat parameter layout: [lambda_ar] alpha.. beta.. delta.. [nu..] phi.
class EELayout {
 public:
  EELayout(std::size_t m, const EEModelSpec& spec) : m_(m), spec_(spec) {
    spec.validate();
    n_alpha_ = spec.shared_alpha ? 1 : m;
    n_nu_ = spec.include_neighbor ? (spec.shared_nu ? 1 : m) : 0;
  }

  std::size_t size() const {
    return (spec_.include_ar ? 1 : 0) + n_alpha_ + 2 * static_cast<std::size_t>(spec_.harmonics) +
           n_nu_ + 1;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    auto indexed = [](const char* base, std::size_t k) {
      return std::string(base) + "[" + std::to_string(k + 1) + "]";
    };
    if (spec_.include_ar) out.emplace_back("lambda_ar");
    for (std::size_t i = 0; i < n_alpha_; ++i)
      out.push_back(spec_.shared_alpha ? "alpha" : indexed("alpha", i));
    for (int s = 0; s < spec_.harmonics; ++s) out.push_back(indexed("beta", static_cast<std::size_t>(s)));
    for (int s = 0; s < spec_.harmonics; ++s) out.push_back(indexed("delta", static_cast<std::size_t>(s)));
    for (std::size_t i = 0; i < n_nu_; ++i) out.push_back(spec_.shared_nu ? "nu" : indexed("nu", i));
    out.emplace_back("phi");
    return out;
  }

  /// Entries estimated on the log scale (they must stay positive).
  std::vector<bool> positive() const {
    std::vector<bool> p(size(), false);
    if (spec_.include_ar) p[0] = true;
    for (std::size_t k = size() - 1 - n_nu_; k < size(); ++k) p[k] = true;
    return p;
  }

  EEParams unpack(const Eigen::VectorXd& v) const {
    detail::require(static_cast<std::size_t>(v.size()) == size(), "parameter vector length mismatch");
    EEParams p;
    Eigen::Index k = 0;
    if (spec_.include_ar) p.lambda_ar = v(k++);
    for (std::size_t i = 0; i < n_alpha_; ++i) p.alpha.push_back(v(k++));
    for (int s = 0; s < spec_.harmonics; ++s) p.beta.push_back(v(k++));
    for (int s = 0; s < spec_.harmonics; ++s) p.delta.push_back(v(k++));
    for (std::size_t i = 0; i < n_nu_; ++i) p.nu.push_back(v(k++));
    p.phi = v(k);
    return p;
  }

  Eigen::VectorXd pack(const EEParams& p) const {
    check(p);
    Eigen::VectorXd v(static_cast<Eigen::Index>(size()));
    Eigen::Index k = 0;
    if (spec_.include_ar) v(k++) = p.lambda_ar;
    for (double a : p.alpha) v(k++) = a;
    for (double b : p.beta) v(k++) = b;
    for (double d : p.delta) v(k++) = d;
    for (double n : p.nu) v(k++) = n;
    v(k) = p.phi;
    return v;
  }

  void check(const EEParams& p) const {
    detail::require(p.alpha.size() == n_alpha_, "wrong number of intercepts");
    detail::require(p.beta.size() == static_cast<std::size_t>(spec_.harmonics) &&
                        p.delta.size() == static_cast<std::size_t>(spec_.harmonics),
                    "wrong number of seasonal coefficients");
    detail::require(p.nu.size() == n_nu_, "wrong number of neighbourhood coefficients");
    detail::require(p.lambda_ar >= 0.0, "autoregressive coefficient must be >= 0");
    detail::require(p.phi >= 0.0, "dispersion must be >= 0");
    for (double n : p.nu) detail::require(n >= 0.0, "neighbourhood coefficients must be >= 0");
    detail::require(spec_.include_ar || p.lambda_ar == 0.0, "autoregression is switched off");
  }

  std::size_t alpha_offset() const { return spec_.include_ar ? 1 : 0; }
  std::size_t seasonal_offset() const { return alpha_offset() + n_alpha_; }
  std::size_t nu_offset() const { return seasonal_offset() + 2 * static_cast<std::size_t>(spec_.harmonics); }
  std::size_t alpha_index(std::size_t unit) const { return alpha_offset() + (spec_.shared_alpha ? 0 : unit); }
  std::size_t nu_index(std::size_t unit) const { return nu_offset() + (spec_.shared_nu ? 0 : unit); }
  std::size_t units() const { return m_; }
  const EEModelSpec& spec() const { return spec_; }

 private:
  std::size_t m_;
  EEModelSpec spec_;
  std::size_t n_alpha_ = 0;
  std::size_t n_nu_ = 0;
};

namespace detail {

inline std::size_t ee_first_period(int lag) { return static_cast<std::size_t>(std::max(1, lag)); }

struct EEMeanParts {
  double ar = 0.0;        // y_{i,t-1}
  double neighbor = 0.0;  // sum_j w_ji y_{j,t-l}
  double endemic = 0.0;   // exp(eta_it)
  double mu = 0.0;
};

// Column t (0-based) of the panel; history before t must exist.
inline EEMeanParts ee_mean(const CountPanel& panel, const EELayout& lay, const EEParams& p,
                           std::size_t i, std::size_t t) {
  const auto& spec = lay.spec();
  EEMeanParts out;
  double eta = p.alpha[spec.shared_alpha ? 0 : i];
  const double tt = static_cast<double>(t + 1);
  for (int s = 0; s < spec.harmonics; ++s) {
    const double w = 2.0 * std::numbers::pi * (s + 1) / spec.period;
    eta += p.beta[static_cast<std::size_t>(s)] * std::sin(w * tt) +
           p.delta[static_cast<std::size_t>(s)] * std::cos(w * tt);
  }
  out.endemic = std::exp(eta);
  out.mu = out.endemic;
  if (spec.include_ar) {
    out.ar = static_cast<double>(panel.y[i][t - 1]);
    out.mu += p.lambda_ar * out.ar;
  }
  if (spec.include_neighbor) {
    const auto& w = *panel.weights;
    const std::size_t src = t - static_cast<std::size_t>(panel.lag);
    for (std::size_t j = 0; j < panel.units(); ++j)
      if (j != i)
        out.neighbor += w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) *
                        static_cast<double>(panel.y[j][src]);
    out.mu += p.nu[spec.shared_nu ? 0 : i] * out.neighbor;
  }
  return out;
}

// d/dphi of the negative binomial log mass.
inline double negbin_dphi(long y, double mu, double phi) {
  const double yd = static_cast<double>(y);
  double g = 0.0;
  for (long j = 1; j < y; ++j) g += static_cast<double>(j) / (1.0 + static_cast<double>(j) * phi);
  const double x = phi * mu;
  g -= yd * mu / (1.0 + x);
  // log1p(x)/phi^2 - mu/(phi (1 + x))
  if (x < 1e-4) g += mu * mu * (0.5 - 2.0 * x / 3.0 + 0.75 * x * x);
  else g += (std::log1p(x) - x / (1.0 + x)) / (phi * phi);
  return g;
}

inline void ee_check_panel(const CountPanel& panel, const EEModelSpec& spec) {
  panel.validate();
  spec.validate();
  if (spec.include_neighbor)
    detail::require(panel.weights.has_value(), "neighbourhood term needs a weight matrix");
  detail::require(panel.periods() > ee_first_period(panel.lag),
                  "panel too short for the lag");
}

}  // namespace detail

/// Sum over units and t = max(1, lag)+1..T of log NegBin(y_it; mu_it, phi).
inline double ee_loglik(const CountPanel& panel, const EEModelSpec& spec, const EEParams& params) {
  detail::ee_check_panel(panel, spec);
  const EELayout lay(panel.units(), spec);
  lay.check(params);
  double ll = 0.0;
  for (std::size_t i = 0; i < panel.units(); ++i)
    for (std::size_t t = detail::ee_first_period(panel.lag); t < panel.periods(); ++t) {
      const auto parts = detail::ee_mean(panel, lay, params, i, t);
      ll += NegBin{parts.mu, params.phi}.log_pmf(panel.y[i][t]);
    }
  return ll;
}

/// Analytic gradient of ee_loglik with respect to the packed natural parameters.
inline Eigen::VectorXd ee_loglik_gradient(const CountPanel& panel, const EEModelSpec& spec,
                                          const EEParams& params) {
  detail::ee_check_panel(panel, spec);
  const EELayout lay(panel.units(), spec);
  lay.check(params);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(lay.size()));
  const auto phi_k = static_cast<Eigen::Index>(lay.size() - 1);
  const auto seas = static_cast<Eigen::Index>(lay.seasonal_offset());
  const auto S = spec.harmonics;
  for (std::size_t i = 0; i < panel.units(); ++i)
    for (std::size_t t = detail::ee_first_period(panel.lag); t < panel.periods(); ++t) {
      const auto parts = detail::ee_mean(panel, lay, params, i, t);
      const long y = panel.y[i][t];
      const double yd = static_cast<double>(y);
      const double mu = parts.mu;
      const double dmu = yd / mu - (1.0 + params.phi * yd) / (1.0 + params.phi * mu);
      if (spec.include_ar) g(0) += dmu * parts.ar;
      g(static_cast<Eigen::Index>(lay.alpha_index(i))) += dmu * parts.endemic;
      const double tt = static_cast<double>(t + 1);
      for (int s = 0; s < S; ++s) {
        const double w = 2.0 * std::numbers::pi * (s + 1) / spec.period;
        g(seas + s) += dmu * parts.endemic * std::sin(w * tt);
        g(seas + S + s) += dmu * parts.endemic * std::cos(w * tt);
      }
      if (spec.include_neighbor) g(static_cast<Eigen::Index>(lay.nu_index(i))) += dmu * parts.neighbor;
      g(phi_k) += detail::negbin_dphi(y, mu, params.phi);
    }
  return g;
}

struct EEFitOptions {
  numeric::MinimizeOptions minimize{1000, 1e-6, 1e-14};
  std::optional<EEParams> start;
  double boundary_threshold = 1e-4;  // lambda_ar below this is reported as on the boundary
};

struct EEFit {
  EEModelSpec spec;
  EEParams params;
  std::vector<std::string> names;
  Eigen::VectorXd estimate;    // packed natural parameters
  Eigen::VectorXd se;
  Eigen::MatrixXd covariance;  // inverse observed information, natural scale
  double loglik = 0.0;
  bool converged = false;
  double grad_norm = 0.0;      // on the optimisation scale
  int iterations = 0;
  bool boundary_ar = false;
  int lag = 1;

  /// Natural-scale Wald interval for entry k.
  std::pair<double, double> wald_interval(std::size_t k, double z = 1.959963984540054) const {
    const auto kk = static_cast<Eigen::Index>(k);
    return {estimate(kk) - z * se(kk), estimate(kk) + z * se(kk)};
  }
};

/// Maximum-likelihood fit by BFGS on log-transformed positive parameters.
inline EEFit ee_fit(const CountPanel& panel, const EEModelSpec& spec, const EEFitOptions& opts = {}) {
  detail::ee_check_panel(panel, spec);
  detail::require(panel.periods() >= static_cast<std::size_t>(3 + panel.lag),
                  "fitting needs T >= 3 + lag");
  const EELayout lay(panel.units(), spec);
  const std::size_t m = panel.units();
  const std::size_t T = panel.periods();
  if (spec.include_neighbor && !spec.shared_nu)
    detail::require(m * T >= 50 * lay.size(),
                    "per-unit neighbourhood coefficients need m*T >= 50 * number of parameters");

  EEParams start;
  if (opts.start) {
    start = *opts.start;
  } else {
    std::vector<double> means(m, 0.0);
    double overall = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (long v : panel.y[i]) means[i] += static_cast<double>(v);
      overall += means[i];
      means[i] /= static_cast<double>(T);
    }
    overall /= static_cast<double>(m * T);
    const double shrink = spec.include_ar || spec.include_neighbor ? 0.5 : 1.0;
    if (spec.shared_alpha) start.alpha = {std::log(std::max(shrink * overall, 0.05))};
    else
      for (double mu : means) start.alpha.push_back(std::log(std::max(shrink * mu, 0.05)));
    start.beta.assign(static_cast<std::size_t>(spec.harmonics), 0.0);
    start.delta.assign(static_cast<std::size_t>(spec.harmonics), 0.0);
    start.lambda_ar = spec.include_ar ? 0.3 : 0.0;
    if (spec.include_neighbor) start.nu.assign(spec.shared_nu ? 1 : m, 0.05);
    start.phi = 0.1;
  }
  const auto pos = lay.positive();
  const auto d = static_cast<Eigen::Index>(lay.size());

  auto to_natural = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd v = u;
    for (Eigen::Index k = 0; k < d; ++k)
      if (pos[static_cast<std::size_t>(k)]) v(k) = std::exp(u(k));
    return v;
  };
  Eigen::VectorXd u0 = lay.pack(start);
  for (Eigen::Index k = 0; k < d; ++k)
    if (pos[static_cast<std::size_t>(k)]) u0(k) = std::log(std::max(u0(k), 1e-8));

  auto f = [&](const Eigen::VectorXd& u) {
    const Eigen::VectorXd v = to_natural(u);
    if (!v.allFinite()) return std::numeric_limits<double>::infinity();
    const double ll = ee_loglik(panel, spec, lay.unpack(v));
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  };
  auto grad = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd {
    const Eigen::VectorXd v = to_natural(u);
    Eigen::VectorXd g = -ee_loglik_gradient(panel, spec, lay.unpack(v));
    for (Eigen::Index k = 0; k < d; ++k)
      if (pos[static_cast<std::size_t>(k)]) g(k) *= v(k);
    return g;
  };

  const auto res = numeric::minimize_bfgs(f, grad, u0, opts.minimize);
  EEFit out;
  out.spec = spec;
  out.lag = panel.lag;
  out.names = lay.names();
  out.estimate = to_natural(res.x);
  out.params = lay.unpack(out.estimate);
  out.loglik = -res.value;
  out.grad_norm = res.grad_norm;
  out.iterations = res.iterations;
  out.converged = res.converged;
  out.boundary_ar = spec.include_ar && out.params.lambda_ar < opts.boundary_threshold;
  if (!out.converged && !(out.grad_norm < 1e-3))
    throw ConvergenceError("endemic-epidemic fit did not converge (gradient norm " +
                               std::to_string(out.grad_norm) + ")",
                           out.grad_norm);

  const Eigen::MatrixXd h = numeric::numeric_hessian(grad, res.x);
  Eigen::MatrixXd cov_u;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive())
    cov_u = ldlt.solve(Eigen::MatrixXd::Identity(d, d));
  else
    cov_u = h.completeOrthogonalDecomposition().pseudoInverse();
  Eigen::VectorXd jac = Eigen::VectorXd::Ones(d);
  for (Eigen::Index k = 0; k < d; ++k)
    if (pos[static_cast<std::size_t>(k)]) jac(k) = out.estimate(k);
  out.covariance = jac.asDiagonal() * cov_u * jac.asDiagonal();
  out.se = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return out;
}

/// Plug-in negative binomial predictive for every unit at 0-based period t,
/// using observed counts before t (t may equal T, one step past the panel).
inline std::vector<NegBin> ee_predict_one_step(const EEFit& fit, const CountPanel& panel,
                                               std::size_t t) {
  detail::ee_check_panel(panel, fit.spec);
  detail::require(t >= detail::ee_first_period(panel.lag) && t <= panel.periods(),
                  "prediction period outside the panel horizon");
  const EELayout lay(panel.units(), fit.spec);
  std::vector<NegBin> out;
  for (std::size_t i = 0; i < panel.units(); ++i)
    out.push_back({detail::ee_mean(panel, lay, fit.params, i, t).mu, fit.params.phi});
  return out;
}

/// Draws a panel from the model. Periods before max(1, lag) use the endemic
/// mean alone.
inline CountPanel simulate_ee_panel(const EEModelSpec& spec, const EEParams& params, std::size_t m,
                                    std::size_t T, std::uint64_t seed,
                                    std::optional<Eigen::MatrixXd> weights = std::nullopt,
                                    int lag = 1) {
  spec.validate();
  detail::require(m >= 1 && T >= 1, "panel must be at least 1 x 1");
  const EELayout lay(m, spec);
  lay.check(params);
  CountPanel panel;
  panel.y.assign(m, std::vector<long>(T, 0));
  panel.weights = std::move(weights);
  panel.lag = lag;
  if (spec.include_neighbor) detail::require(panel.weights.has_value(), "neighbourhood term needs weights");
  Rng rng(seed);
  EEModelSpec endemic_only = spec;
  endemic_only.include_ar = false;
  endemic_only.include_neighbor = false;
  EEParams ep = params;
  ep.lambda_ar = 0.0;
  ep.nu.clear();
  const EELayout lay0(m, endemic_only);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < m; ++i) {
      const bool warmup = t < detail::ee_first_period(lag);
      const double mu = warmup ? detail::ee_mean(panel, lay0, ep, i, t).mu
                               : detail::ee_mean(panel, lay, params, i, t).mu;
      panel.y[i][t] = NegBin{mu, params.phi}.sample(rng);
    }
  for (std::size_t t = 0; t < T; ++t) {
    panel.week.push_back(static_cast<int>(t % 52) + 1);
    panel.year.push_back(static_cast<int>(t / 52) + 1);
  }
  return panel;
}

}  // namespace epistat
