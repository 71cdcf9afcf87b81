#pragma once

// GARCH(1,1) maximum likelihood and the spillover GARCH with exogenous
// variance regressors:
//
//   s2[t] = omega + alpha r[t-1]^2 + beta s2[t-1] + sum_k gamma_k x_k[t-1]
//
// The plain model has no regressors. The spillover model uses
// x_1 = e_fin^2 and x_2 = e_fin^2 * 1{crisis}. Estimation works on the
// series rescaled to unit sample second moment, with transformed parameters:
// log omega, a logistic map of (alpha, beta) onto {alpha, beta > 0,
// alpha + beta < 1}, gammas untransformed, and log(nu - 2) for Student-t.

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>

#include "spillover/error.hpp"
#include "spillover/numeric.hpp"
#include "spillover/optimize.hpp"

namespace spillover {

enum class Distribution { normal, student_t };

inline std::string_view to_string(Distribution d) { return d == Distribution::normal ? "normal" : "student_t"; }

inline Distribution parse_distribution(std::string_view s) {
  if (s == "normal") return Distribution::normal;
  if (s == "student_t" || s == "t") return Distribution::student_t;
  throw DataError("unknown distribution '" + std::string(s) + "'");
}

struct GarchParams {
  double omega = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  std::optional<double> dof;  // Student-t degrees of freedom

  [[nodiscard]] bool valid() const {
    return omega > 0.0 && alpha >= 0.0 && beta >= 0.0 && alpha + beta < 1.0 && (!dof || *dof > 2.0);
  }
  [[nodiscard]] double unconditional_variance() const { return omega / (1.0 - alpha - beta); }
};

/// Conditional variance recursion seeded with `init_var` at the first date.
inline std::vector<double> garch_filter(const GarchParams& params, std::span<const double> r, double init_var) {
  if (!(params.omega > 0.0 && params.alpha >= 0.0 && params.beta >= 0.0)) throw DataError("invalid GARCH parameters");
  if (!(init_var > 0.0)) throw DataError("initial variance must be positive");
  std::vector<double> s2(r.size());
  if (r.empty()) return s2;
  s2[0] = init_var;
  for (std::size_t t = 1; t < r.size(); ++t)
    s2[t] = params.omega + params.alpha * r[t - 1] * r[t - 1] + params.beta * s2[t - 1];
  return s2;
}

/// Mean of squares: the seed variance for residual (zero-mean) series.
inline double second_moment(std::span<const double> r) {
  if (r.empty()) throw DataError("empty series");
  double s = 0.0;
  for (double v : r) s += v * v;
  return s / static_cast<double>(r.size());
}

namespace detail {

/// Log density of a zero-mean observation with variance s2 (Student-t scaled to unit variance).
inline double log_density(double r, double s2, Distribution dist, double dof) {
  if (dist == Distribution::normal) return -0.5 * (std::log(2.0 * std::numbers::pi) + std::log(s2) + r * r / s2);
  const double z = r * r / (s2 * (dof - 2.0));
  return std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) - 0.5 * std::log(std::numbers::pi * (dof - 2.0)) -
         0.5 * std::log(s2) - 0.5 * (dof + 1.0) * std::log1p(z);
}

/// Variance model with exogenous lagged regressors. `exog[k][t]` enters s2[t + 1].
struct GarchXModel {
  std::span<const double> r;
  std::vector<std::vector<double>> exog;
  Distribution dist = Distribution::normal;
  double init_var = 1.0;

  [[nodiscard]] std::size_t num_exog() const { return exog.size(); }
  /// Natural parameter layout: omega, alpha, beta, gamma_1..gamma_K, [dof].
  [[nodiscard]] Eigen::Index num_params() const {
    return 3 + static_cast<Eigen::Index>(exog.size()) + (dist == Distribution::student_t ? 1 : 0);
  }

  /// Log-likelihood and (optionally) its gradient in natural parameters.
  /// Returns NaN when the variance path leaves the positive half-line.
  double loglik(const Eigen::VectorXd& theta, Eigen::VectorXd* grad, std::vector<double>* path = nullptr) const {
    const std::size_t k = exog.size();
    const double omega = theta[0];
    const double alpha = theta[1];
    const double beta = theta[2];
    const double dof = dist == Distribution::student_t ? theta[3 + static_cast<Eigen::Index>(k)] : 0.0;
    const Eigen::Index np = num_params();
    Eigen::VectorXd ds2 = Eigen::VectorXd::Zero(np);  // d s2[t] / d theta
    Eigen::VectorXd ds2_next(np);
    if (grad) grad->setZero(np);
    if (path) path->assign(r.size(), 0.0);
    double s2 = init_var;
    double total = 0.0;
    const double dig_term =
        dist == Distribution::student_t
            ? 0.5 * boost::math::digamma(0.5 * (dof + 1.0)) - 0.5 * boost::math::digamma(0.5 * dof) - 0.5 / (dof - 2.0)
            : 0.0;
    for (std::size_t t = 0; t < r.size(); ++t) {
      if (t > 0) {
        const double r2 = r[t - 1] * r[t - 1];
        double next = omega + alpha * r2 + beta * s2;
        for (std::size_t j = 0; j < k; ++j) next += theta[3 + static_cast<Eigen::Index>(j)] * exog[j][t - 1];
        if (grad) {
          ds2_next = beta * ds2;
          ds2_next[0] += 1.0;
          ds2_next[1] += r2;
          ds2_next[2] += s2;
          for (std::size_t j = 0; j < k; ++j) ds2_next[3 + static_cast<Eigen::Index>(j)] += exog[j][t - 1];
          if (dist == Distribution::student_t) ds2_next[np - 1] = 0.0;
          ds2.swap(ds2_next);
        }
        s2 = next;
      }
      if (!(s2 > 0.0) || !std::isfinite(s2)) return std::numeric_limits<double>::quiet_NaN();
      if (path) (*path)[t] = s2;
      const double rt = r[t];
      total += log_density(rt, s2, dist, dof);
      if (grad) {
        double dl_ds2 = 0.0;
        if (dist == Distribution::normal) {
          dl_ds2 = -0.5 / s2 + 0.5 * rt * rt / (s2 * s2);
        } else {
          const double z = rt * rt / (s2 * (dof - 2.0));
          dl_ds2 = -0.5 / s2 + 0.5 * (dof + 1.0) * z / (s2 * (1.0 + z));
          (*grad)[np - 1] += dig_term - 0.5 * std::log1p(z) + 0.5 * (dof + 1.0) * z / ((dof - 2.0) * (1.0 + z));
        }
        *grad += dl_ds2 * ds2;
      }
    }
    return total;
  }

  /// Natural parameters from the unconstrained vector.
  [[nodiscard]] Eigen::VectorXd to_natural(const Eigen::VectorXd& u) const {
    Eigen::VectorXd theta(num_params());
    const double ea = std::exp(u[1]);
    const double eb = std::exp(u[2]);
    const double den = 1.0 + ea + eb;
    theta[0] = std::exp(u[0]);
    theta[1] = ea / den;
    theta[2] = eb / den;
    for (std::size_t j = 0; j < exog.size(); ++j)
      theta[3 + static_cast<Eigen::Index>(j)] = u[3 + static_cast<Eigen::Index>(j)];
    if (dist == Distribution::student_t) theta[num_params() - 1] = 2.0 + std::exp(u[num_params() - 1]);
    return theta;
  }

  [[nodiscard]] Eigen::VectorXd to_unconstrained(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd u(num_params());
    const double rest = 1.0 - theta[1] - theta[2];
    u[0] = std::log(theta[0]);
    u[1] = std::log(theta[1] / rest);
    u[2] = std::log(theta[2] / rest);
    for (std::size_t j = 0; j < exog.size(); ++j)
      u[3 + static_cast<Eigen::Index>(j)] = theta[3 + static_cast<Eigen::Index>(j)];
    if (dist == Distribution::student_t) u[num_params() - 1] = std::log(theta[num_params() - 1] - 2.0);
    return u;
  }

  /// Chain rule: gradient in unconstrained coordinates.
  [[nodiscard]] Eigen::VectorXd pull_back(const Eigen::VectorXd& theta, const Eigen::VectorXd& g) const {
    Eigen::VectorXd out = g;
    const double a = theta[1];
    const double b = theta[2];
    out[0] = g[0] * theta[0];
    out[1] = g[1] * a * (1.0 - a) - g[2] * a * b;
    out[2] = -g[1] * a * b + g[2] * b * (1.0 - b);
    if (dist == Distribution::student_t) out[num_params() - 1] = g[num_params() - 1] * (theta[num_params() - 1] - 2.0);
    return out;
  }
};

struct GarchXEstimate {
  Eigen::VectorXd theta;        // natural parameters on the unit-scale series
  Eigen::VectorXd se;           // standard errors, same scale
  Eigen::MatrixXd covariance;   // inverse observed information, same scale
  std::vector<double> variance; // unit-scale variance path
  double loglik = 0.0;          // unit-scale log-likelihood
  int iterations = 0;
  bool converged = false;
};

inline GarchXEstimate estimate_garch_x(const GarchXModel& model, const Eigen::VectorXd& start_theta) {
  const double n = static_cast<double>(model.r.size());
  Objective objective = [&](const Eigen::VectorXd& u, Eigen::VectorXd& g) {
    const Eigen::VectorXd theta = model.to_natural(u);
    Eigen::VectorXd g_nat;
    const double ll = model.loglik(theta, &g_nat);
    if (!std::isfinite(ll)) return std::numeric_limits<double>::infinity();
    g = -model.pull_back(theta, g_nat) / n;
    return -ll / n;
  };
  MinimizeOptions options;
  options.max_iterations = 2000;
  options.gradient_tolerance = 1e-6;
  options.relative_tolerance = 1e-9;
  const auto result = minimize_bfgs(objective, model.to_unconstrained(start_theta), options);

  GarchXEstimate est;
  est.theta = model.to_natural(result.x);
  est.iterations = result.iterations;
  est.converged = result.converged;
  est.loglik = model.loglik(est.theta, nullptr, &est.variance);

  const Eigen::Index np = model.num_params();
  Eigen::VectorXd steps(np);
  for (Eigen::Index j = 0; j < np; ++j) steps[j] = 1e-5 * std::max(std::abs(est.theta[j]), 1e-2);
  // Keep the probe inside the stationarity region.
  const double room = 1.0 - est.theta[1] - est.theta[2];
  steps[1] = std::min(steps[1], 0.25 * std::max(room, 1e-9));
  steps[2] = std::min(steps[2], 0.25 * std::max(room, 1e-9));
  steps[1] = std::min(steps[1], 0.5 * std::max(est.theta[1], 1e-12));
  auto gradient = [&](const Eigen::VectorXd& theta) {
    Eigen::VectorXd g;
    const double ll = model.loglik(theta, &g);
    if (!std::isfinite(ll)) g = Eigen::VectorXd::Constant(np, std::numeric_limits<double>::quiet_NaN());
    return g;
  };
  const Eigen::MatrixXd hessian = hessian_from_gradient(gradient, est.theta, steps);
  est.covariance = Eigen::MatrixXd::Constant(np, np, std::numeric_limits<double>::quiet_NaN());
  est.se = Eigen::VectorXd::Constant(np, std::numeric_limits<double>::quiet_NaN());
  if (hessian.allFinite()) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(-hessian);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      est.covariance = ldlt.solve(Eigen::MatrixXd::Identity(np, np));
      for (Eigen::Index j = 0; j < np; ++j) {
        const double v = est.covariance(j, j);
        est.se[j] = v > 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return est;
}

}  // namespace detail

/// Sum of log densities of the residual series under the variance recursion.
inline double garch_loglik(const GarchParams& params, std::span<const double> r, Distribution dist, double init_var) {
  if (!params.valid()) throw DataError("invalid GARCH parameters");
  if (dist == Distribution::student_t && !params.dof) throw DataError("Student-t likelihood needs degrees of freedom");
  const auto s2 = garch_filter(params, r, init_var);
  double total = 0.0;
  for (std::size_t t = 0; t < r.size(); ++t)
    total += detail::log_density(r[t], s2[t], dist, params.dof.value_or(0.0));
  if (!std::isfinite(total)) throw NumericalError("GARCH log-likelihood overflow");
  return total;
}

/// Same, seeded with the series' mean square.
inline double garch_loglik(const GarchParams& params, std::span<const double> r, Distribution dist) {
  return garch_loglik(params, r, dist, second_moment(r));
}

struct GarchFit {
  GarchParams params;
  std::vector<double> variance;                // sigma^2_t
  std::vector<double> standardized_residuals;  // r_t / sigma_t
  double loglik = 0.0;
  double se_omega = 0.0;
  double se_alpha = 0.0;
  double se_beta = 0.0;
  std::optional<double> se_dof;
  int iterations = 0;
  bool converged = false;
  bool boundary = false;  // alpha + beta >= 0.999
};

/// Constrained MLE of GARCH(1,1) on a zero-mean residual series (T >= 250).
inline GarchFit fit_garch11(std::span<const double> r, Distribution dist = Distribution::normal) {
  if (r.size() < 250) throw DataError("GARCH(1,1) estimation needs at least 250 observations");
  const double m2 = second_moment(r);
  if (!(m2 > 0.0) || !std::isfinite(m2)) throw DataError("GARCH input has zero or non-finite variance");
  const double scale = std::sqrt(m2);
  std::vector<double> unit(r.size());
  for (std::size_t t = 0; t < r.size(); ++t) unit[t] = r[t] / scale;

  detail::GarchXModel model{unit, {}, dist, 1.0};
  Eigen::VectorXd start(model.num_params());
  start[0] = 0.05;
  start[1] = 0.05;
  start[2] = 0.90;
  if (dist == Distribution::student_t) start[3] = 8.0;
  const auto est = detail::estimate_garch_x(model, start);
  if (!est.converged) throw ConvergenceError("GARCH(1,1) did not converge");

  GarchFit fit;
  fit.params.omega = est.theta[0] * m2;
  fit.params.alpha = est.theta[1];
  fit.params.beta = est.theta[2];
  fit.se_omega = est.se[0] * m2;
  fit.se_alpha = est.se[1];
  fit.se_beta = est.se[2];
  if (dist == Distribution::student_t) {
    fit.params.dof = est.theta[3];
    fit.se_dof = est.se[3];
  }
  fit.loglik = est.loglik - static_cast<double>(r.size()) * std::log(scale);
  fit.variance.resize(r.size());
  fit.standardized_residuals.resize(r.size());
  for (std::size_t t = 0; t < r.size(); ++t) {
    fit.variance[t] = est.variance[t] * m2;
    fit.standardized_residuals[t] = r[t] / std::sqrt(fit.variance[t]);
  }
  fit.iterations = est.iterations;
  fit.converged = est.converged;
  fit.boundary = fit.params.alpha + fit.params.beta >= 0.999;
  return fit;
}

struct SpilloverParams {
  double omega = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma1 = 0.0;  // loading on e_fin^2[t-1]
  double gamma2 = 0.0;  // extra loading when t-1 is a crisis date
  std::optional<double> dof;
};

struct SpilloverFit {
  SpilloverParams params;
  std::vector<double> variance;
  double loglik = 0.0;
  double se_omega = 0.0, se_alpha = 0.0, se_beta = 0.0, se_gamma1 = 0.0, se_gamma2 = 0.0;
  double t_omega = 0.0, t_alpha = 0.0, t_beta = 0.0, t_gamma1 = 0.0, t_gamma2 = 0.0;
  double total_crisis_effect = 0.0;     // gamma1 + gamma2
  double t_total_crisis_effect = 0.0;
  bool gamma1_identified = true;
  bool gamma2_identified = true;
  int iterations = 0;
  bool converged = false;
  bool boundary = false;

  /// Significantly positive loading at the two-sided 5% level.
  [[nodiscard]] bool normal_spillover() const { return gamma1_identified && t_gamma1 > 1.96; }
  [[nodiscard]] bool crisis_amplification() const { return gamma2_identified && t_gamma2 > 1.96; }
};

/// MLE of the spillover GARCH for an industry residual series.
///
/// `e_fin` holds the standardized financial residuals on the same dates and
/// `crisis` flags crisis dates. A regressor that is identically zero (all
/// e_fin zero, or no crisis dates) is removed from the model and reported as
/// unidentified with gamma = 0 and NaN inference.
inline SpilloverFit fit_spillover(std::span<const double> r, std::span<const double> e_fin,
                                  const std::vector<bool>& crisis, Distribution dist = Distribution::normal) {
  if (r.size() != e_fin.size() || r.size() != crisis.size()) throw DataError("spillover inputs are not aligned");
  if (r.size() < 250) throw DataError("spillover estimation needs at least 250 observations");
  const double m2 = second_moment(r);
  if (!(m2 > 0.0) || !std::isfinite(m2)) throw DataError("industry series has zero or non-finite variance");
  const double scale = std::sqrt(m2);
  std::vector<double> unit(r.size());
  for (std::size_t t = 0; t < r.size(); ++t) unit[t] = r[t] / scale;

  std::vector<double> x1(r.size());
  std::vector<double> x2(r.size());
  for (std::size_t t = 0; t < r.size(); ++t) {
    x1[t] = e_fin[t] * e_fin[t];
    x2[t] = crisis[t] ? x1[t] : 0.0;
  }
  // Only lagged values (positions 0..T-2) ever enter the recursion.
  auto active = [&](const std::vector<double>& x) {
    for (std::size_t t = 0; t + 1 < x.size(); ++t) {
      if (x[t] != 0.0) return true;
    }
    return false;
  };
  SpilloverFit fit;
  fit.gamma1_identified = active(x1);
  fit.gamma2_identified = active(x2);
  if (fit.gamma1_identified && fit.gamma2_identified) {
    bool differs = false;
    for (std::size_t t = 0; t + 1 < x1.size() && !differs; ++t) differs = x1[t] != x2[t];
    if (!differs) fit.gamma1_identified = false;  // crisis covers the whole sample: gamma1 and gamma2 coincide
  }

  detail::GarchXModel model{unit, {}, dist, 1.0};
  if (fit.gamma1_identified) model.exog.push_back(x1);
  if (fit.gamma2_identified) model.exog.push_back(x2);
  Eigen::VectorXd start = Eigen::VectorXd::Zero(model.num_params());
  start[0] = 0.05;
  start[1] = 0.05;
  start[2] = 0.90;
  if (dist == Distribution::student_t) start[model.num_params() - 1] = 8.0;
  const auto est = detail::estimate_garch_x(model, start);
  if (!est.converged) throw ConvergenceError("spillover GARCH did not converge");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  fit.params.omega = est.theta[0] * m2;
  fit.params.alpha = est.theta[1];
  fit.params.beta = est.theta[2];
  fit.se_omega = est.se[0] * m2;
  fit.se_alpha = est.se[1];
  fit.se_beta = est.se[2];
  Eigen::Index next = 3;
  Eigen::Index idx1 = -1;
  Eigen::Index idx2 = -1;
  fit.se_gamma1 = nan;
  fit.se_gamma2 = nan;
  if (fit.gamma1_identified) {
    idx1 = next++;
    fit.params.gamma1 = est.theta[idx1] * m2;
    fit.se_gamma1 = est.se[idx1] * m2;
  }
  if (fit.gamma2_identified) {
    idx2 = next++;
    fit.params.gamma2 = est.theta[idx2] * m2;
    fit.se_gamma2 = est.se[idx2] * m2;
  }
  if (dist == Distribution::student_t) fit.params.dof = est.theta[next];
  auto tstat = [](double v, double se) { return se > 0.0 ? v / se : std::numeric_limits<double>::quiet_NaN(); };
  fit.t_omega = tstat(fit.params.omega, fit.se_omega);
  fit.t_alpha = tstat(fit.params.alpha, fit.se_alpha);
  fit.t_beta = tstat(fit.params.beta, fit.se_beta);
  fit.t_gamma1 = fit.gamma1_identified ? tstat(fit.params.gamma1, fit.se_gamma1) : nan;
  fit.t_gamma2 = fit.gamma2_identified ? tstat(fit.params.gamma2, fit.se_gamma2) : nan;
  fit.total_crisis_effect = fit.params.gamma1 + fit.params.gamma2;
  if (idx1 >= 0 && idx2 >= 0) {
    const double var = est.covariance(idx1, idx1) + est.covariance(idx2, idx2) + 2.0 * est.covariance(idx1, idx2);
    fit.t_total_crisis_effect = var > 0.0 ? fit.total_crisis_effect / (std::sqrt(var) * m2) : nan;
  } else {
    fit.t_total_crisis_effect = idx1 >= 0 ? fit.t_gamma1 : (idx2 >= 0 ? fit.t_gamma2 : nan);
  }
  fit.loglik = est.loglik - static_cast<double>(r.size()) * std::log(scale);
  fit.variance.resize(r.size());
  for (std::size_t t = 0; t < r.size(); ++t) fit.variance[t] = est.variance[t] * m2;
  fit.iterations = est.iterations;
  fit.converged = est.converged;
  fit.boundary = fit.params.alpha + fit.params.beta >= 0.999;
  return fit;
}

}  // namespace spillover
