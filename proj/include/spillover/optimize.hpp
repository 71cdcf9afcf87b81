#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace spillover {

struct MinimizeOptions {
  int max_iterations = 2000;
  double gradient_tolerance = 1e-6;   // max-norm of the gradient
  double relative_tolerance = 1e-9;   // relative change of the objective
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
};

/// Objective returning f(x) and writing its gradient. Infeasible points return +inf.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// BFGS with an Armijo backtracking line search.
///
/// Converges when the gradient max-norm drops below tolerance, or when the
/// relative objective change stays below tolerance on two consecutive steps.
inline MinimizeResult minimize_bfgs(const Objective& objective, Eigen::VectorXd x0,
                                    const MinimizeOptions& options = {}) {
  const Eigen::Index n = x0.size();
  MinimizeResult res;
  res.x = std::move(x0);
  res.gradient = Eigen::VectorXd::Zero(n);
  res.value = objective(res.x, res.gradient);
  if (!std::isfinite(res.value)) return res;

  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  int small_changes = 0;
  Eigen::VectorXd g_new(n);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    res.iterations = iter;
    if (res.gradient.cwiseAbs().maxCoeff() < options.gradient_tolerance) {
      res.converged = true;
      return res;
    }
    Eigen::VectorXd direction = -h_inv * res.gradient;
    double slope = direction.dot(res.gradient);
    if (!(slope < 0.0)) {
      h_inv.setIdentity();
      direction = -res.gradient;
      slope = direction.dot(res.gradient);
    }
    // Keep trial steps bounded in the transformed parameter space.
    const double max_step = direction.cwiseAbs().maxCoeff();
    double step = max_step > 5.0 ? 5.0 / max_step : 1.0;
    Eigen::VectorXd x_new;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = res.x + step * direction;
      f_new = objective(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= res.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent possible along the quasi-Newton direction: retry once from steepest descent.
      if (!h_inv.isIdentity()) {
        h_inv.setIdentity();
        continue;
      }
      res.converged = res.gradient.cwiseAbs().maxCoeff() < 1e3 * options.gradient_tolerance;
      return res;
    }
    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - res.gradient;
    const double change = std::abs(res.value - f_new) / std::max(1.0, std::abs(f_new));
    res.x = x_new;
    res.value = f_new;
    res.gradient = g_new;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (iter == 0) h_inv *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
      h_inv = (eye - rho * s * y.transpose()) * h_inv * (eye - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    small_changes = change < options.relative_tolerance ? small_changes + 1 : 0;
    if (small_changes >= 2) {
      res.iterations = iter + 1;
      res.converged = true;
      return res;
    }
  }
  res.iterations = options.max_iterations;
  res.converged = res.gradient.cwiseAbs().maxCoeff() < options.gradient_tolerance;
  return res;
}

/// Symmetrized Jacobian of a gradient function by central differences.
inline Eigen::MatrixXd hessian_from_gradient(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
                                             const Eigen::VectorXd& x, const Eigen::VectorXd& steps) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd h(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd up = x;
    Eigen::VectorXd down = x;
    up[j] += steps[j];
    down[j] -= steps[j];
    h.col(j) = (gradient(up) - gradient(down)) / (2.0 * steps[j]);
  }
  return 0.5 * (h + h.transpose());
}

}  // namespace spillover
