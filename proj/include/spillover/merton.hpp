#pragma once

// Merton structural model: equity as a call on firm assets, inverted for asset
// value and volatility, and aggregated to quarterly industry distance-to-default.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spillover/calendar.hpp"
#include "spillover/error.hpp"
#include "spillover/numeric.hpp"

namespace spillover {

struct MertonInputs {
  double equity = 0.0;      // E
  double equity_vol = 0.0;  // sigma_E, annualized
  double debt = 0.0;        // face value D
  double rate = 0.0;        // continuously compounded r
  double horizon = 1.0;     // T in years
};

struct MertonSolution {
  double asset_value = 0.0;  // V
  double asset_vol = 0.0;    // sigma_V
  double distance_to_default = 0.0;
  int iterations = 0;
  double residual = 0.0;  // max relative error in (E, sigma_E)
  bool converged = false;
};

struct MertonForward {
  double equity = 0.0;
  double equity_vol = 0.0;
};

inline MertonForward merton_forward(double v, double sigma_v, double debt, double rate, double horizon) {
  if (!(v > 0.0 && sigma_v > 0.0 && debt > 0.0 && horizon > 0.0)) throw DataError("Merton inputs must be positive");
  const double s = sigma_v * std::sqrt(horizon);
  const double d1 = (std::log(v / debt) + (rate + 0.5 * sigma_v * sigma_v) * horizon) / s;
  const double d2 = d1 - s;
  MertonForward out;
  out.equity = v * normal_cdf(d1) - debt * std::exp(-rate * horizon) * normal_cdf(d2);
  out.equity_vol = v / out.equity * normal_cdf(d1) * sigma_v;
  return out;
}

/// Distance to default with drift mu (mu = r by default in the solver).
inline double distance_to_default(double v, double sigma_v, double debt, double mu, double horizon) {
  return (std::log(v / debt) + (mu - 0.5 * sigma_v * sigma_v) * horizon) / (sigma_v * std::sqrt(horizon));
}

/// Damped Newton on the two pricing equations, started from V = E + D e^{-rT}
/// and sigma_V = sigma_E E / V. Iterates in (log V, log sigma_V).
inline MertonSolution solve_merton(const MertonInputs& in, std::optional<double> drift = std::nullopt,
                                   int max_iterations = 200) {
  if (!(in.equity > 0.0 && in.equity_vol > 0.0 && in.debt > 0.0 && in.horizon > 0.0))
    throw DataError("Merton inputs must be positive");
  const double disc = std::exp(-in.rate * in.horizon);
  const double sqrt_t = std::sqrt(in.horizon);

  // Residuals relative to the targets and their Jacobian in (log V, log sigma_V).
  auto evaluate = [&](const Eigen::Vector2d& u, Eigen::Vector2d& f, Eigen::Matrix2d* jac) {
    const double v = std::exp(u[0]);
    const double sv = std::exp(u[1]);
    const double s = sv * sqrt_t;
    const double d1 = (std::log(v / in.debt) + (in.rate + 0.5 * sv * sv) * in.horizon) / s;
    const double d2 = d1 - s;
    const double n1 = normal_cdf(d1);
    const double p1 = normal_pdf(d1);
    const double e = v * n1 - in.debt * disc * normal_cdf(d2);
    const double se = v * n1 * sv;  // E * sigma_E
    f[0] = e / in.equity - 1.0;
    f[1] = se / (in.equity * in.equity_vol) - 1.0;
    if (jac) {
      // dE/dV = N(d1); dE/dsigma = V phi(d1) sqrt(T) (vega).
      const double de_dv = n1;
      const double de_ds = v * p1 * sqrt_t;
      const double dd1_dv = 1.0 / (v * s);
      const double dd1_ds = sqrt_t - d1 / sv;
      const double dse_dv = n1 * sv + v * p1 * dd1_dv * sv;
      const double dse_ds = v * n1 + v * sv * p1 * dd1_ds;
      (*jac)(0, 0) = de_dv * v / in.equity;
      (*jac)(0, 1) = de_ds * sv / in.equity;
      (*jac)(1, 0) = dse_dv * v / (in.equity * in.equity_vol);
      (*jac)(1, 1) = dse_ds * sv / (in.equity * in.equity_vol);
    }
  };

  const double v0 = in.equity + in.debt * disc;
  Eigen::Vector2d u(std::log(v0), std::log(in.equity_vol * in.equity / v0));
  Eigen::Vector2d f;
  Eigen::Matrix2d jac;
  evaluate(u, f, &jac);
  MertonSolution sol;
  for (int iter = 0; iter < max_iterations; ++iter) {
    sol.iterations = iter + 1;
    if (f.cwiseAbs().maxCoeff() < 1e-12) {
      sol.converged = true;
      break;
    }
    Eigen::Vector2d step = -jac.partialPivLu().solve(f);
    if (!step.allFinite()) break;
    // Cap the move in log space, then backtrack on the residual norm.
    const double cap = step.cwiseAbs().maxCoeff();
    if (cap > 1.0) step /= cap;
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      const Eigen::Vector2d trial = u + t * step;
      Eigen::Vector2d ft;
      evaluate(trial, ft, nullptr);
      if (ft.allFinite() && ft.norm() < f.norm()) {
        u = trial;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    evaluate(u, f, &jac);
  }
  sol.residual = f.cwiseAbs().maxCoeff();
  sol.converged = sol.converged || sol.residual < 1e-10;
  if (!sol.converged)
    throw ConvergenceError("Merton inversion did not converge (residual " + std::to_string(sol.residual) + ")");
  sol.asset_value = std::exp(u[0]);
  sol.asset_vol = std::exp(u[1]);
  sol.distance_to_default =
      distance_to_default(sol.asset_value, sol.asset_vol, in.debt, drift.value_or(in.rate), in.horizon);
  return sol;
}

struct FirmMonthDd {
  std::string firm;
  int year = 0;
  int month = 0;  // 1..12
  double dd = 0.0;
};

/// Equal-weighted industry mean per month, then the mean of the quarter's months.
inline std::map<std::pair<std::string, Quarter>, double> industry_dd(
    const std::vector<FirmMonthDd>& firms, const std::map<std::string, std::string>& industry_map) {
  std::map<std::tuple<std::string, int, int>, std::pair<double, int>> monthly;
  for (const auto& f : firms) {
    auto it = industry_map.find(f.firm);
    if (it == industry_map.end()) throw DataError("firm " + f.firm + " has no industry");
    if (!std::isfinite(f.dd)) continue;
    auto& [sum, count] = monthly[{it->second, f.year, f.month}];
    sum += f.dd;
    ++count;
  }
  std::map<std::pair<std::string, Quarter>, std::pair<double, int>> quarterly;
  for (const auto& [key, sc] : monthly) {
    const auto& [industry, year, month] = key;
    auto& [sum, count] = quarterly[{industry, Quarter{year, (month - 1) / 3 + 1}}];
    sum += sc.first / sc.second;
    ++count;
  }
  std::map<std::pair<std::string, Quarter>, double> out;
  for (const auto& [key, sc] : quarterly) out[key] = sc.first / sc.second;
  return out;
}

}  // namespace spillover
