#pragma once

// Panel regressions on industry-quarter data: exponential-mean count models by
// GMM with cluster-robust inference, and Prais-Winsten FGLS with
// panel-corrected standard errors.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spillover/calendar.hpp"
#include "spillover/error.hpp"
#include "spillover/numeric.hpp"
#include "spillover/panel.hpp"

namespace spillover {

enum class ColumnKind { intercept, variable, control, industry_dummy, time_dummy };

struct DesignSpec {
  std::string response = "CCX";
  std::vector<std::string> variables;  // main regressors
  std::vector<std::string> split;      // subset of `variables` split by crisis regime
  std::vector<std::string> controls;
  std::optional<CompetitionClass> subsample;
  bool intercept = true;
  bool industry_dummies = true;
  bool time_dummies = true;
  std::vector<int> instrument_lags{2};  // empty: instruments equal the regressors
  bool drop_all_zero_groups = true;     // count models: drop dummies whose rows have y == 0 throughout
};

/// Values that are not industry characteristics (e.g. distance-to-default series).
using ExtraColumns = std::map<std::string, std::map<std::pair<std::string, Quarter>, double>>;

struct PanelDesign {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  Eigen::MatrixXd z;
  std::vector<std::string> columns;
  std::vector<ColumnKind> kinds;
  std::vector<std::string> instruments;
  std::vector<int> cluster;  // industry index per row
  std::vector<int> period;   // quarter index per row
  std::vector<std::string> cluster_names;
  std::vector<std::string> dropped;  // notes on removed rows or columns

  [[nodiscard]] Eigen::Index rows() const { return x.rows(); }
  [[nodiscard]] std::size_t groups() const {
    return std::set<int>(cluster.begin(), cluster.end()).size();
  }
  /// Indices of the non-dummy, non-intercept columns.
  [[nodiscard]] std::vector<Eigen::Index> slope_indices() const {
    std::vector<Eigen::Index> out;
    for (std::size_t j = 0; j < kinds.size(); ++j) {
      if (kinds[j] == ColumnKind::variable || kinds[j] == ColumnKind::control) out.push_back(static_cast<Eigen::Index>(j));
    }
    return out;
  }
  [[nodiscard]] Eigen::Index column(const std::string& name) const {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (columns[j] == name) return static_cast<Eigen::Index>(j);
    }
    throw DataError("no design column '" + name + "'");
  }
};

namespace detail {

inline double lookup(const IndustryQuarter& row, const std::string& name, const ExtraColumns& extra) {
  if (auto it = extra.find(name); it != extra.end()) {
    auto v = it->second.find({row.industry, row.quarter});
    return v == it->second.end() ? kMissing : v->second;
  }
  return industry_variable(row, name);
}

}  // namespace detail

/// Design matrix with every regressor lagged one quarter.
///
/// Split variables enter as X * D_non-crisis and X * D_crisis with the regime
/// of the lagged quarter. Instruments are the same columns built from lag
/// `instrument_lags` (the regime dummy stays at t-1), plus the intercept and
/// dummies. Rows lacking the deepest lag are dropped. One industry and one time
/// dummy are omitted.
inline PanelDesign build_design(const IndustryQuarterPanel& panel, const DesignSpec& spec,
                                const CrisisWindow& crisis, const ExtraColumns& extra = {}) {
  if (!panel.balanced()) throw DataError("unbalanced panel");
  for (const auto& s : spec.split) {
    if (std::find(spec.variables.begin(), spec.variables.end(), s) == spec.variables.end())
      throw DataError("split variable " + s + " is not in the variable list");
  }
  const auto industries = panel.industries();
  const auto quarters = panel.quarters();
  const int max_lag = spec.instrument_lags.empty()
                          ? 1
                          : std::max(1, *std::max_element(spec.instrument_lags.begin(), spec.instrument_lags.end()));
  const auto n_q = static_cast<int>(quarters.size());
  if (n_q <= max_lag) throw DataError("panel too short for the requested lags");
  for (int q = 1; q < n_q; ++q) {
    if (quarters[static_cast<std::size_t>(q)].index() != quarters[static_cast<std::size_t>(q - 1)].index() + 1)
      throw DataError("panel quarters are not consecutive");
  }
  const auto& rows = panel.rows();  // industry-major, quarter-minor
  auto at = [&](std::size_t i, int q) -> const IndustryQuarter& {
    return rows[i * quarters.size() + static_cast<std::size_t>(q)];
  };

  // Regressor recipe: (variable, regime) with regime -1 = unsplit, 0 = non-crisis, 1 = crisis.
  struct Recipe {
    std::string name;
    std::string var;
    int regime;
    ColumnKind kind;
  };
  std::vector<Recipe> recipes;
  for (const auto& v : spec.variables) {
    if (std::find(spec.split.begin(), spec.split.end(), v) != spec.split.end()) {
      recipes.push_back({v + "*non-crisis", v, 0, ColumnKind::variable});
      recipes.push_back({v + "*crisis", v, 1, ColumnKind::variable});
    } else {
      recipes.push_back({v, v, -1, ColumnKind::variable});
    }
  }
  for (const auto& c : spec.controls) recipes.push_back({c, c, -1, ColumnKind::control});

  auto value = [&](std::size_t i, int q, const std::string& var) {
    const double v = detail::lookup(at(i, q), var, extra);
    if (!std::isfinite(v))
      throw DataError("missing value of " + var + " for " + industries[i] + " " + quarters[static_cast<std::size_t>(q)].str());
    return v;
  };

  // Collect rows.
  struct Row {
    std::size_t industry;
    int q;
  };
  std::vector<Row> kept;
  for (std::size_t i = 0; i < industries.size(); ++i) {
    for (int q = max_lag; q < n_q; ++q) {
      if (spec.subsample && at(i, q).competition != *spec.subsample) continue;
      kept.push_back({i, q});
    }
  }

  PanelDesign d;
  // Count models cannot fit a dummy whose rows all have y == 0.
  std::set<std::size_t> zero_industries;
  std::set<int> zero_quarters;
  if (spec.drop_all_zero_groups) {
    std::map<std::size_t, double> by_ind;
    std::map<int, double> by_q;
    for (const auto& r : kept) {
      const double y = value(r.industry, r.q, spec.response);
      by_ind[r.industry] += y;
      by_q[r.q] += y;
    }
    if (spec.industry_dummies) {
      for (const auto& [i, s] : by_ind) {
        if (s == 0.0) zero_industries.insert(i);
      }
    }
    if (spec.time_dummies) {
      for (const auto& [q, s] : by_q) {
        if (s == 0.0) zero_quarters.insert(q);
      }
    }
    for (auto i : zero_industries) d.dropped.push_back("industry " + industries[i] + ": response is zero in every row");
    for (auto q : zero_quarters)
      d.dropped.push_back("quarter " + quarters[static_cast<std::size_t>(q)].str() + ": response is zero in every row");
    std::erase_if(kept, [&](const Row& r) { return zero_industries.count(r.industry) || zero_quarters.count(r.q); });
  }
  if (kept.empty()) throw DataError("design has no rows");

  std::vector<std::size_t> ind_levels;
  std::vector<int> q_levels;
  {
    std::set<std::size_t> si;
    std::set<int> sq;
    for (const auto& r : kept) {
      si.insert(r.industry);
      sq.insert(r.q);
    }
    ind_levels.assign(si.begin(), si.end());
    q_levels.assign(sq.begin(), sq.end());
  }

  // Column layout.
  if (spec.intercept) {
    d.columns.emplace_back("cons");
    d.kinds.push_back(ColumnKind::intercept);
  }
  for (const auto& r : recipes) {
    d.columns.push_back(r.name);
    d.kinds.push_back(r.kind);
  }
  const std::size_t n_core = d.columns.size();
  std::map<std::size_t, std::size_t> ind_col;
  std::map<int, std::size_t> q_col;
  if (spec.industry_dummies) {
    for (std::size_t k = 1; k < ind_levels.size(); ++k) {
      ind_col[ind_levels[k]] = d.columns.size();
      d.columns.push_back("industry:" + industries[ind_levels[k]]);
      d.kinds.push_back(ColumnKind::industry_dummy);
    }
  }
  if (spec.time_dummies) {
    for (std::size_t k = 1; k < q_levels.size(); ++k) {
      q_col[q_levels[k]] = d.columns.size();
      d.columns.push_back("quarter:" + quarters[static_cast<std::size_t>(q_levels[k])].str());
      d.kinds.push_back(ColumnKind::time_dummy);
    }
  }
  const std::size_t n_dummy = d.columns.size() - n_core;

  // Instrument layout: intercept, lagged recipes per lag, controls, dummies.
  const bool exactly_identified = spec.instrument_lags.empty();
  if (exactly_identified) {
    d.instruments = std::vector<std::string>(d.columns.begin(), d.columns.end());
  } else {
    if (spec.intercept) d.instruments.emplace_back("cons");
    for (int lag : spec.instrument_lags) {
      for (const auto& r : recipes) d.instruments.push_back(r.name + "[lag" + std::to_string(lag) + "]");
    }
    for (const auto& r : recipes) {
      if (r.kind == ColumnKind::control) d.instruments.push_back(r.name);
    }
    d.instruments.insert(d.instruments.end(), d.columns.begin() + static_cast<std::ptrdiff_t>(n_core), d.columns.end());
  }

  const auto n = static_cast<Eigen::Index>(kept.size());
  d.y.resize(n);
  d.x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(d.columns.size()));
  d.z = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(d.instruments.size()));
  for (Eigen::Index row = 0; row < n; ++row) {
    const auto& r = kept[static_cast<std::size_t>(row)];
    d.y[row] = value(r.industry, r.q, spec.response);
    d.cluster.push_back(static_cast<int>(r.industry));
    d.period.push_back(quarters[static_cast<std::size_t>(r.q)].index());
    const bool crisis_prev = crisis.contains(quarters[static_cast<std::size_t>(r.q - 1)]);
    auto build = [&](const Recipe& rec, int lag) {
      const double v = value(r.industry, r.q - lag, rec.var);
      if (rec.regime < 0) return v;
      return (rec.regime == 1) == crisis_prev ? v : 0.0;
    };
    Eigen::Index col = 0;
    if (spec.intercept) d.x(row, col++) = 1.0;
    for (const auto& rec : recipes) d.x(row, col++) = build(rec, 1);
    if (auto it = ind_col.find(r.industry); it != ind_col.end()) d.x(row, static_cast<Eigen::Index>(it->second)) = 1.0;
    if (auto it = q_col.find(r.q); it != q_col.end()) d.x(row, static_cast<Eigen::Index>(it->second)) = 1.0;

    if (exactly_identified) {
      d.z.row(row) = d.x.row(row);
    } else {
      Eigen::Index zc = 0;
      if (spec.intercept) d.z(row, zc++) = 1.0;
      for (int lag : spec.instrument_lags) {
        for (const auto& rec : recipes) d.z(row, zc++) = build(rec, lag);
      }
      for (const auto& rec : recipes) {
        if (rec.kind == ColumnKind::control) d.z(row, zc++) = build(rec, 1);
      }
      d.z.row(row).tail(static_cast<Eigen::Index>(n_dummy)) =
          d.x.row(row).tail(static_cast<Eigen::Index>(n_dummy));
    }
  }
  for (const auto& name : industries) d.cluster_names.push_back(name);
  return d;
}

// ---------------------------------------------------------------------------
// Poisson GMM

struct GmmOptions {
  int max_iterations = 200;
  double tolerance = 1e-8;  // max-norm of the GMM objective gradient
  bool two_step = true;
};

struct GmmResult {
  std::vector<std::string> columns;
  Eigen::VectorXd coef;
  Eigen::MatrixXd covariance;  // cluster-robust
  Eigen::VectorXd se;
  Eigen::VectorXd t;
  Eigen::VectorXd fitted;      // exp(X b)
  double wald = 0.0;
  double wald_p = 1.0;
  int wald_dof = 0;
  double pseudo_r2 = 0.0;
  std::optional<double> j_statistic;
  std::size_t observations = 0;
  std::size_t groups = 0;
  int iterations = 0;
  bool converged = false;

  [[nodiscard]] Eigen::Index index(const std::string& name) const {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (columns[j] == name) return static_cast<Eigen::Index>(j);
    }
    throw DataError("no coefficient '" + name + "'");
  }
};

namespace detail {

inline void require_full_rank(const Eigen::MatrixXd& m, const std::string& what) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  qr.setThreshold(1e-10);
  if (qr.rank() < m.cols()) throw NumericalError(what + " is rank deficient (collinear columns)");
}

inline Eigen::VectorXd safe_exp(const Eigen::VectorXd& eta) {
  return eta.array().min(700.0).exp().matrix();
}

/// Cluster sums of z_i u_i, one row per cluster.
inline Eigen::MatrixXd cluster_scores(const Eigen::MatrixXd& z, const Eigen::VectorXd& u, const std::vector<int>& cluster) {
  std::map<int, Eigen::Index> pos;
  for (int c : cluster) pos.emplace(c, 0);
  Eigen::Index k = 0;
  for (auto& [c, p] : pos) p = k++;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(k, z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) s.row(pos[cluster[static_cast<std::size_t>(i)]]) += u[i] * z.row(i);
  return s;
}

/// Moore-Penrose inverse of a symmetric matrix by eigen-decomposition.
inline Eigen::MatrixXd symmetric_pinv(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const auto& ev = es.eigenvalues();
  const double cut = 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd inv = ev.unaryExpr([cut](double v) { return v > cut ? 1.0 / v : 0.0; });
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

struct GmmStep {
  Eigen::VectorXd beta;
  int iterations = 0;
  bool converged = false;
};

/// Damped Gauss-Newton on Q(b) = g(b)' W g(b) with g(b) = Z'(y - exp(Xb)) / n.
inline GmmStep solve_gmm(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                         const Eigen::MatrixXd& w, Eigen::VectorXd beta, const GmmOptions& options) {
  const double n = static_cast<double>(x.rows());
  auto moments = [&](const Eigen::VectorXd& b, Eigen::VectorXd& mu) {
    mu = safe_exp(x * b);
    return Eigen::VectorXd(z.transpose() * (y - mu) / n);
  };
  Eigen::VectorXd mu;
  Eigen::VectorXd g = moments(beta, mu);
  double q = g.dot(w * g);
  GmmStep out;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    out.iterations = iter + 1;
    const Eigen::MatrixXd jac = -(z.transpose() * (x.array().colwise() * mu.array()).matrix()) / n;
    const Eigen::MatrixXd wj = w * jac;
    const Eigen::VectorXd grad = jac.transpose() * (w * g);
    const Eigen::MatrixXd h = jac.transpose() * wj;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success) throw NumericalError("GMM: singular Gauss-Newton system");
    const Eigen::VectorXd step = -ldlt.solve(grad);
    if (!step.allFinite()) throw NumericalError("GMM: singular Gauss-Newton system");
    if (grad.cwiseAbs().maxCoeff() < options.tolerance || step.cwiseAbs().maxCoeff() < options.tolerance) {
      out.converged = true;
      break;
    }
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd mu_new;
    for (int ls = 0; ls < 50; ++ls) {
      const Eigen::VectorXd trial = beta + t * step;
      const Eigen::VectorXd g_new = moments(trial, mu_new);
      const double q_new = g_new.dot(w * g_new);
      if (std::isfinite(q_new) && q_new <= q) {
        beta = trial;
        g = g_new;
        mu = mu_new;
        q = q_new;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      out.converged = step.cwiseAbs().maxCoeff() < 1e3 * options.tolerance;
      break;
    }
  }
  out.beta = std::move(beta);
  return out;
}

/// Poisson pseudo-MLE by Newton iterations; used for starting values.
inline Eigen::VectorXd poisson_pmle_start(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int iterations = 50) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  const double my = std::max(y.mean(), 1e-3);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if ((x.col(j).array() == 1.0).all()) {
      beta[j] = std::log(my);
      break;
    }
  }
  double ll = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd eta = x * beta;
    const Eigen::VectorXd mu = safe_exp(eta);
    const Eigen::VectorXd score = x.transpose() * (y - mu);
    const Eigen::MatrixXd info = x.transpose() * (x.array().colwise() * mu.array()).matrix();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    Eigen::VectorXd step = ldlt.solve(score);
    if (!step.allFinite()) break;
    double t = 1.0;
    for (int ls = 0; ls < 30; ++ls) {
      const Eigen::VectorXd trial = beta + t * step;
      const Eigen::VectorXd e2 = x * trial;
      const double ll_new = (y.array() * e2.array() - safe_exp(e2).array()).sum();
      if (std::isfinite(ll_new) && ll_new >= ll - 1e-12 * std::abs(ll)) {
        beta = trial;
        ll = ll_new;
        break;
      }
      t *= 0.5;
    }
    if (step.cwiseAbs().maxCoeff() * t < 1e-10) break;
  }
  return beta;
}

}  // namespace detail

/// Two-step GMM for E[z (y - exp(x'b))] = 0 with cluster-robust inference.
inline GmmResult poisson_gmm(const PanelDesign& d, const GmmOptions& options = {}) {
  const auto n = d.x.rows();
  if (n == 0) throw DataError("empty design");
  if (d.z.cols() < d.x.cols()) throw DataError("fewer instruments than regressors");
  if ((d.y.array() < 0.0).any() || (d.y.array() != d.y.array().floor()).any())
    throw DataError("Poisson response must be non-negative integers");
  detail::require_full_rank(d.x, "regressor matrix");
  detail::require_full_rank(d.z, "instrument matrix");
  const double dn = static_cast<double>(n);
  const bool over = d.z.cols() > d.x.cols();

  Eigen::MatrixXd w = (d.z.transpose() * d.z / dn).inverse();
  if (!w.allFinite()) throw NumericalError("GMM: weighting matrix singular");
  auto step = detail::solve_gmm(d.x, d.z, d.y, w, detail::poisson_pmle_start(d.x, d.y), options);
  if (over && options.two_step) {
    // Cluster score sums have rank at most G, below the moment count once the
    // dummies enter, so the second-step weight uses observation-level scores.
    // Inference below stays cluster-robust.
    const Eigen::VectorXd u = d.y - detail::safe_exp(d.x * step.beta);
    const Eigen::MatrixXd zu = d.z.array().colwise() * u.array();
    w = detail::symmetric_pinv(zu.transpose() * zu / dn);
    auto second = detail::solve_gmm(d.x, d.z, d.y, w, step.beta, options);
    second.iterations += step.iterations;
    step = std::move(second);
  }
  if (!step.converged) throw ConvergenceError("Poisson GMM did not converge");

  GmmResult res;
  res.columns = d.columns;
  res.coef = step.beta;
  res.iterations = step.iterations;
  res.converged = true;
  res.fitted = detail::safe_exp(d.x * res.coef);
  res.observations = static_cast<std::size_t>(n);
  res.groups = d.groups();

  const Eigen::VectorXd u = d.y - res.fitted;
  const Eigen::MatrixXd sc = detail::cluster_scores(d.z, u, d.cluster);
  const auto n_groups = static_cast<double>(sc.rows());
  const Eigen::MatrixXd s = sc.transpose() * sc / dn;
  const Eigen::MatrixXd jac = -(d.z.transpose() * (d.x.array().colwise() * res.fitted.array()).matrix()) / dn;
  const Eigen::MatrixXd bread = (jac.transpose() * w * jac).inverse();
  const Eigen::MatrixXd meat = jac.transpose() * w * s * w * jac;
  const double small_sample = n_groups > 1.0 ? n_groups / (n_groups - 1.0) : 1.0;
  res.covariance = small_sample * bread * meat * bread / dn;
  res.covariance = 0.5 * (res.covariance + res.covariance.transpose());
  res.se = res.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  res.t = res.coef.cwiseQuotient(res.se);

  if (over) {
    const Eigen::VectorXd g = d.z.transpose() * u / dn;
    res.j_statistic = dn * g.dot(w * g);
  }
  res.pseudo_r2 = squared_correlation(std::span<const double>(d.y.data(), static_cast<std::size_t>(n)),
                                      std::span<const double>(res.fitted.data(), static_cast<std::size_t>(n)));
  const auto slopes = d.slope_indices();
  if (!slopes.empty()) {
    Eigen::VectorXd b(static_cast<Eigen::Index>(slopes.size()));
    Eigen::MatrixXd v(b.size(), b.size());
    for (std::size_t i = 0; i < slopes.size(); ++i) {
      b[static_cast<Eigen::Index>(i)] = res.coef[slopes[i]];
      for (std::size_t j = 0; j < slopes.size(); ++j)
        v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = res.covariance(slopes[i], slopes[j]);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(v);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0.0).all()) {
      res.wald = b.dot(ldlt.solve(b));
      res.wald_dof = static_cast<int>(slopes.size());
      res.wald_p = chi_square_sf(res.wald, res.wald_dof);
    } else {
      res.wald = kMissing;
      res.wald_p = kMissing;
    }
  }
  return res;
}

/// Chi-square p-value of b'V^{-1}b over the selected coefficients.
inline double wald_all_zero(const Eigen::VectorXd& coef, const Eigen::MatrixXd& covariance,
                            const std::vector<Eigen::Index>& indices) {
  if (indices.empty()) throw DataError("Wald test needs at least one coefficient");
  const auto k = static_cast<Eigen::Index>(indices.size());
  Eigen::VectorXd b(k);
  Eigen::MatrixXd v(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    b[i] = coef[indices[static_cast<std::size_t>(i)]];
    for (Eigen::Index j = 0; j < k; ++j) v(i, j) = covariance(indices[static_cast<std::size_t>(i)], indices[static_cast<std::size_t>(j)]);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(v);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) throw NumericalError("Wald test: singular covariance block");
  const double stat = b.dot(lu.solve(b));
  return chi_square_sf(stat, static_cast<double>(k));
}

inline double wald_all_zero(const GmmResult& result, const std::vector<Eigen::Index>& indices) {
  return wald_all_zero(result.coef, result.covariance, indices);
}

/// Percent change in the expected count for a one-standard-deviation increase.
inline double economic_impact(double b, double s) { return 100.0 * std::expm1(b * s); }

inline double pseudo_r2(std::span<const double> y, std::span<const double> fitted) {
  return squared_correlation(y, fitted);
}

// ---------------------------------------------------------------------------
// Prais-Winsten

struct PraisWinstenOptions {
  std::optional<double> fixed_rho;  // skip estimation and use this value
};

struct PraisWinstenFit {
  std::vector<std::string> columns;
  Eigen::VectorXd coef;
  Eigen::MatrixXd covariance;  // panel-corrected
  Eigen::VectorXd se;
  Eigen::VectorXd t;
  double rho = 0.0;
  double r2 = 0.0;
  std::size_t observations = 0;
  std::size_t groups = 0;
};

namespace detail {

/// Row index of the same panel's previous period, or -1.
inline std::vector<Eigen::Index> previous_rows(const PanelDesign& d) {
  std::map<std::pair<int, int>, Eigen::Index> pos;
  for (Eigen::Index i = 0; i < d.rows(); ++i) pos[{d.cluster[static_cast<std::size_t>(i)], d.period[static_cast<std::size_t>(i)]}] = i;
  std::vector<Eigen::Index> prev(static_cast<std::size_t>(d.rows()), -1);
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    auto it = pos.find({d.cluster[static_cast<std::size_t>(i)], d.period[static_cast<std::size_t>(i)] - 1});
    if (it != pos.end()) prev[static_cast<std::size_t>(i)] = it->second;
  }
  return prev;
}

}  // namespace detail

/// Common-rho AR(1) FGLS keeping each panel's first observation, with
/// standard errors robust to heteroskedasticity and contemporaneous
/// correlation across panels.
inline PraisWinstenFit prais_winsten(const PanelDesign& d, const PraisWinstenOptions& options = {}) {
  const auto n = d.rows();
  if (n == 0) throw DataError("empty design");
  const auto prev = detail::previous_rows(d);

  double rho = 0.0;
  if (options.fixed_rho) {
    rho = *options.fixed_rho;
  } else {
    const auto ols = least_squares(d.x, d.y, "Prais-Winsten first stage");
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto p = prev[static_cast<std::size_t>(i)];
      if (p < 0) continue;
      num += ols.residuals[i] * ols.residuals[p];
      den += ols.residuals[p] * ols.residuals[p];
    }
    if (!(den > 0.0)) throw NumericalError("Prais-Winsten: no consecutive residual pairs");
    rho = num / den;
  }
  if (!(std::abs(rho) < 1.0)) throw NumericalError("Prais-Winsten: |rho| >= 1");

  Eigen::MatrixXd xs(n, d.x.cols());
  Eigen::VectorXd ys(n);
  const double first_scale = std::sqrt(1.0 - rho * rho);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto p = prev[static_cast<std::size_t>(i)];
    if (p < 0) {
      xs.row(i) = first_scale * d.x.row(i);
      ys[i] = first_scale * d.y[i];
    } else {
      xs.row(i) = d.x.row(i) - rho * d.x.row(p);
      ys[i] = d.y[i] - rho * d.y[p];
    }
  }
  const auto ls = least_squares(xs, ys, "Prais-Winsten");

  PraisWinstenFit fit;
  fit.columns = d.columns;
  fit.coef = ls.coef;
  fit.rho = rho;
  fit.observations = static_cast<std::size_t>(n);
  fit.groups = d.groups();
  const double tss = (ys.array() - ys.mean()).square().sum();
  fit.r2 = tss > 0.0 ? 1.0 - ls.rss / tss : 0.0;

  // Panel-corrected covariance: Sigma_ij from residuals on common periods.
  std::map<int, Eigen::Index> panel_pos;
  for (int c : d.cluster) panel_pos.emplace(c, 0);
  Eigen::Index np = 0;
  for (auto& [c, p] : panel_pos) p = np++;
  std::map<int, std::vector<Eigen::Index>> by_period;
  for (Eigen::Index i = 0; i < n; ++i) by_period[d.period[static_cast<std::size_t>(i)]].push_back(i);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(np, np);
  Eigen::MatrixXd count = Eigen::MatrixXd::Zero(np, np);
  for (const auto& [t, idx] : by_period) {
    for (auto a : idx) {
      for (auto b : idx) {
        const auto pa = panel_pos[d.cluster[static_cast<std::size_t>(a)]];
        const auto pb = panel_pos[d.cluster[static_cast<std::size_t>(b)]];
        sum(pa, pb) += ls.residuals[a] * ls.residuals[b];
        count(pa, pb) += 1.0;
      }
    }
  }
  const Eigen::MatrixXd sigma = sum.cwiseQuotient(count.cwiseMax(1.0));
  const auto k = xs.cols();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [t, idx] : by_period) {
    Eigen::MatrixXd xt(static_cast<Eigen::Index>(idx.size()), k);
    Eigen::MatrixXd st(xt.rows(), xt.rows());
    for (std::size_t a = 0; a < idx.size(); ++a) {
      xt.row(static_cast<Eigen::Index>(a)) = xs.row(idx[a]);
      for (std::size_t b = 0; b < idx.size(); ++b) {
        st(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            sigma(panel_pos[d.cluster[static_cast<std::size_t>(idx[a])]], panel_pos[d.cluster[static_cast<std::size_t>(idx[b])]]);
      }
    }
    meat += xt.transpose() * st * xt;
  }
  fit.covariance = ls.xtx_inverse * meat * ls.xtx_inverse;
  fit.covariance = 0.5 * (fit.covariance + fit.covariance.transpose());
  fit.se = fit.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.t = fit.coef.cwiseQuotient(fit.se);
  return fit;
}

}  // namespace spillover
