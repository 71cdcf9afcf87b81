#pragma once

// Bivariate VAR(p) prewhitening of a (financial, industry) return pair.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spillover/error.hpp"
#include "spillover/numeric.hpp"

namespace spillover {

struct VarFit {
  int lag = 0;
  Eigen::Vector2d intercepts = Eigen::Vector2d::Zero();
  std::vector<Eigen::Matrix2d> coefficients;  // A_1..A_p; row = equation (0 financial, 1 industry)
  std::vector<double> financial_residuals;    // length T - start
  std::vector<double> industry_residuals;
  Eigen::Matrix2d residual_cov = Eigen::Matrix2d::Zero();  // divisor: number of residuals
  Eigen::Matrix<double, Eigen::Dynamic, 2> coefficient_se;  // per regressor row, per equation
  std::size_t first_index = 0;  // position of the first residual in the input series
  double bic = 0.0;
};

namespace detail {

/// Equation-by-equation least squares of y_t on [1, y_{t-1}, ..., y_{t-p}] for
/// t in [start, T). `start` >= p lets several lag orders share one sample.
inline VarFit fit_var_window(std::span<const double> financial, std::span<const double> industry, int p,
                             std::size_t start) {
  if (financial.size() != industry.size()) throw DataError("VAR series are not aligned");
  if (p < 1) throw DataError("VAR lag order must be at least 1");
  const std::size_t t_total = financial.size();
  if (start < static_cast<std::size_t>(p) || start >= t_total) throw DataError("invalid VAR estimation window");
  const auto n = static_cast<Eigen::Index>(t_total - start);
  const Eigen::Index k = 1 + 2 * p;
  if (n <= 4 * p + 2) throw DataError("too few observations for VAR(" + std::to_string(p) + ")");

  Eigen::MatrixXd x(n, k);
  Eigen::MatrixXd y(n, 2);
  for (Eigen::Index row = 0; row < n; ++row) {
    const std::size_t t = start + static_cast<std::size_t>(row);
    y(row, 0) = financial[t];
    y(row, 1) = industry[t];
    x(row, 0) = 1.0;
    for (int lag = 1; lag <= p; ++lag) {
      x(row, 2 * lag - 1) = financial[t - lag];
      x(row, 2 * lag) = industry[t - lag];
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) throw NumericalError("VAR: singular regressor cross-product");
  const Eigen::MatrixXd beta = qr.solve(y);
  const Eigen::MatrixXd resid = y - x * beta;

  VarFit fit;
  fit.lag = p;
  fit.first_index = start;
  fit.intercepts = beta.row(0).transpose();
  for (int lag = 1; lag <= p; ++lag) {
    Eigen::Matrix2d a;
    a(0, 0) = beta(2 * lag - 1, 0);
    a(0, 1) = beta(2 * lag, 0);
    a(1, 0) = beta(2 * lag - 1, 1);
    a(1, 1) = beta(2 * lag, 1);
    fit.coefficients.push_back(a);
  }
  fit.financial_residuals.assign(resid.col(0).data(), resid.col(0).data() + n);
  fit.industry_residuals.assign(resid.col(1).data(), resid.col(1).data() + n);
  fit.residual_cov = resid.transpose() * resid / static_cast<double>(n);

  const Eigen::Index kk = k;
  Eigen::MatrixXd r = qr.matrixR().topLeftCorner(kk, kk).triangularView<Eigen::Upper>();
  Eigen::MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(kk, kk));
  Eigen::MatrixXd xtx_inv = qr.colsPermutation() * (r_inv * r_inv.transpose()) * qr.colsPermutation().transpose();
  fit.coefficient_se.resize(k, 2);
  for (int eq = 0; eq < 2; ++eq) {
    const double s2 = resid.col(eq).squaredNorm() / static_cast<double>(n - k);
    fit.coefficient_se.col(eq) = (xtx_inv.diagonal() * s2).cwiseSqrt();
  }

  const double det = fit.residual_cov.determinant();
  const double n_eff = static_cast<double>(n);
  fit.bic = (det > 0.0 ? std::log(det) : -std::numeric_limits<double>::infinity()) +
            static_cast<double>(2 * k) * std::log(n_eff) / n_eff;
  return fit;
}

}  // namespace detail

/// Least-squares VAR(p) on the pair; residuals cover dates p..T-1.
inline VarFit fit_var(std::span<const double> financial, std::span<const double> industry, int p) {
  if (p < 1) throw DataError("VAR lag order must be at least 1");
  if (financial.size() <= static_cast<std::size_t>(4 * p + 10))
    throw DataError("VAR(" + std::to_string(p) + ") needs more than " + std::to_string(4 * p + 10) + " observations");
  return detail::fit_var_window(financial, industry, p, static_cast<std::size_t>(p));
}

/// BIC-minimizing lag in 1..p_max, every candidate estimated on the common
/// sample that starts at p_max.
inline int select_lag_bic(std::span<const double> financial, std::span<const double> industry, int p_max) {
  if (p_max < 1) throw DataError("p_max must be at least 1");
  if (financial.size() <= static_cast<std::size_t>(4 * p_max + 10))
    throw DataError("not enough observations for p_max = " + std::to_string(p_max));
  int best = 1;
  double best_bic = std::numeric_limits<double>::infinity();
  for (int p = 1; p <= p_max; ++p) {
    const auto fit = detail::fit_var_window(financial, industry, p, static_cast<std::size_t>(p_max));
    if (fit.bic < best_bic) {
      best_bic = fit.bic;
      best = p;
    }
  }
  return best;
}

}  // namespace spillover
