#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>

namespace epistat::numeric {

using Objective = std::function<double(const Eigen::VectorXd&)>;
using Gradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Central-difference gradient.
inline Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x,
                                        double rel_step = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x(i)));
    Eigen::VectorXd up = x, dn = x;
    up(i) += h;
    dn(i) -= h;
    g(i) = (f(up) - f(dn)) / (2.0 * h);
  }
  return g;
}

/// Symmetrized central-difference Jacobian of a gradient (a Hessian).
inline Eigen::MatrixXd numeric_hessian(const Gradient& grad, const Eigen::VectorXd& x,
                                       double rel_step = 1e-5) {
  const auto d = x.size();
  Eigen::MatrixXd h(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double step = rel_step * std::max(1.0, std::abs(x(i)));
    Eigen::VectorXd up = x, dn = x;
    up(i) += step;
    dn(i) -= step;
    h.col(i) = (grad(up) - grad(dn)) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

/// Hessian from function values only.
inline Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x,
                                       double rel_step = 1e-4) {
  const auto d = x.size();
  Eigen::MatrixXd h(d, d);
  const double f0 = f(x);
  Eigen::VectorXd steps(d);
  for (Eigen::Index i = 0; i < d; ++i) steps(i) = rel_step * std::max(1.0, std::abs(x(i)));
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::VectorXd up = x, dn = x;
    up(i) += steps(i);
    dn(i) -= steps(i);
    h(i, i) = (f(up) - 2.0 * f0 + f(dn)) / (steps(i) * steps(i));
    for (Eigen::Index j = 0; j < i; ++j) {
      Eigen::VectorXd pp = x, pm = x, mp = x, mm = x;
      pp(i) += steps(i); pp(j) += steps(j);
      pm(i) += steps(i); pm(j) -= steps(j);
      mp(i) -= steps(i); mp(j) += steps(j);
      mm(i) -= steps(i); mm(j) -= steps(j);
      h(i, j) = h(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * steps(i) * steps(j));
    }
  }
  return h;
}

struct MinimizeOptions {
  int max_iter = 500;
  double grad_tol = 1e-8;  // on the infinity norm of the gradient
  double f_tol = 1e-14;    // relative change in f over one iteration
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  double grad_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

/// BFGS with a backtracking Armijo line search. Non-finite objective values
/// are treated as +inf and simply shorten the step.
inline MinimizeResult minimize_bfgs(const Objective& f, const Gradient& grad, Eigen::VectorXd x,
                                    const MinimizeOptions& opts = {}) {
  const auto d = x.size();
  MinimizeResult out;
  double fx = f(x);
  Eigen::VectorXd g = grad(x);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(d, d);
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd dir = -hinv * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      hinv.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }
    double t = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      x_new = x + t * dir;
      f_new = f(x_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const Eigen::VectorXd g_new = grad(x_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    const double rel_change = std::abs(fx - f_new) / std::max(1.0, std::abs(fx));
    x = x_new;
    g = g_new;
    fx = f_new;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
      hinv = (id - rho * s * y.transpose()) * hinv * (id - rho * y * s.transpose()) +
             rho * s * s.transpose();
    }
    if (rel_change < opts.f_tol && g.lpNorm<Eigen::Infinity>() < std::sqrt(opts.grad_tol)) {
      out.converged = true;
      ++it;
      break;
    }
  }
  out.x = x;
  out.value = fx;
  out.grad_norm = g.lpNorm<Eigen::Infinity>();
  out.iterations = it;
  if (!out.converged && out.grad_norm < opts.grad_tol) out.converged = true;
  return out;
}

inline MinimizeResult minimize_bfgs(const Objective& f, Eigen::VectorXd x,
                                    const MinimizeOptions& opts = {}) {
  return minimize_bfgs(f, [&f](const Eigen::VectorXd& p) { return numeric_gradient(f, p); },
                       std::move(x), opts);
}

}  // namespace epistat::numeric
