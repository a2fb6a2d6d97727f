#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "epistat/core/error.hpp"

namespace epistat::numeric {

struct PoissonGlmFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;  // inverse Fisher information (X' W X)^-1
  Eigen::VectorXd mu;
  double pearson_chi2 = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Log-link Poisson regression by iteratively reweighted least squares.
inline PoissonGlmFit poisson_glm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 int max_iter = 100, double tol = 1e-12) {
  const auto n = x.rows();
  const auto p = x.cols();
  detail::require(y.size() == n, "design and response lengths differ");
  detail::require(n >= p, "fewer observations than coefficients");
  detail::require((y.array() >= 0.0).all(), "counts must be >= 0");
  detail::require(y.sum() > 0.0, "log-linear count regression needs a positive total");

  PoissonGlmFit fit;
  fit.beta = Eigen::VectorXd::Zero(p);
  // Start from the intercept-only fit when the first column is the intercept.
  fit.beta(0) = std::log(y.mean());
  Eigen::VectorXd eta = x * fit.beta;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd mu = eta.array().exp().matrix();
    const Eigen::VectorXd z = eta + ((y - mu).array() / mu.array()).matrix();
    const Eigen::MatrixXd xtw = x.transpose() * mu.asDiagonal();
    const Eigen::MatrixXd info = xtw * x;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw ConvergenceError("Poisson regression: singular information matrix", 0.0);
    const Eigen::VectorXd beta_new = ldlt.solve(xtw * z);
    const double change = (beta_new - fit.beta).lpNorm<Eigen::Infinity>();
    fit.beta = beta_new;
    eta = x * fit.beta;
    fit.iterations = it + 1;
    if (change < tol * (1.0 + fit.beta.lpNorm<Eigen::Infinity>())) {
      fit.converged = true;
      break;
    }
  }
  fit.mu = eta.array().exp().matrix();
  const Eigen::MatrixXd info = x.transpose() * fit.mu.asDiagonal() * x;
  fit.covariance = info.inverse();
  fit.pearson_chi2 = ((y - fit.mu).array().square() / fit.mu.array()).sum();
  if (!fit.converged)
    throw ConvergenceError("Poisson regression did not converge", fit.pearson_chi2);
  return fit;
}

}  // namespace epistat::numeric
