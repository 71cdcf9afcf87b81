#pragma once

// Synthetic data-generating processes with known parameters. Every generator
// is a pure function of its spec (seed included) and reports its ground truth
// as JSON next to the data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "spillover/calendar.hpp"
#include "spillover/characteristics.hpp"
#include "spillover/econometrics.hpp"
#include "spillover/error.hpp"
#include "spillover/garch.hpp"
#include "spillover/numeric.hpp"
#include "spillover/panel.hpp"
#include "spillover/random.hpp"

namespace spillover {

using json = nlohmann::json;

// Stream ids keep each generator's draws independent under one seed.
namespace stream {
inline constexpr std::uint64_t garch = 1;
inline constexpr std::uint64_t returns = 2;
inline constexpr std::uint64_t tail = 3;
inline constexpr std::uint64_t poisson = 4;
inline constexpr std::uint64_t accounting = 5;
inline constexpr std::uint64_t hhi = 6;
inline constexpr std::uint64_t firm_returns = 7;
inline constexpr std::uint64_t ar_panel = 8;
inline std::uint64_t id(std::uint64_t kind, std::uint64_t index) { return (kind << 32) | index; }
}  // namespace stream

inline double draw_innovation(Rng& rng, Distribution dist, double dof) {
  return dist == Distribution::normal ? rng.normal() : rng.standardized_t(dof);
}

struct GarchSample {
  std::vector<double> returns;
  std::vector<double> variance;
  std::vector<double> shocks;  // standardized innovations
};

/// GARCH(1,1) path started at the unconditional variance after a 500-step burn-in.
inline GarchSample simulate_garch(const GarchParams& p, std::size_t n, Rng& rng,
                                  Distribution dist = Distribution::normal) {
  if (!p.valid()) throw DataError("invalid GARCH parameters");
  const double dof = p.dof.value_or(8.0);
  const std::size_t burn = 500;
  GarchSample out;
  out.returns.reserve(n);
  out.variance.reserve(n);
  out.shocks.reserve(n);
  double s2 = p.unconditional_variance();
  double r_prev = 0.0;
  for (std::size_t t = 0; t < n + burn; ++t) {
    if (t > 0) s2 = p.omega + p.alpha * r_prev * r_prev + p.beta * s2;
    const double z = draw_innovation(rng, dist, dof);
    r_prev = std::sqrt(s2) * z;
    if (t >= burn) {
      out.returns.push_back(r_prev);
      out.variance.push_back(s2);
      out.shocks.push_back(z);
    }
  }
  return out;
}

/// Industry variance driven by its own ARCH/GARCH terms and the lagged squared
/// financial shock: s2_t = w + a r_{t-1}^2 + b s2_{t-1} + (g1 + g2 c_{t-1}) e_{t-1}^2.
/// `shocks` supplies the industry's own standardized innovations.
inline GarchSample simulate_spillover_industry(const SpilloverParams& p, const std::vector<double>& e_fin,
                                               const std::vector<bool>& crisis, const std::vector<double>& shocks) {
  const std::size_t n = e_fin.size();
  if (crisis.size() != n || shocks.size() != n) throw DataError("spillover simulation inputs are not aligned");
  // Stationary mean of the variance: E e^2 = 1, crisis share weights gamma2.
  double crisis_share = 0.0;
  for (bool c : crisis) crisis_share += c ? 1.0 : 0.0;
  crisis_share /= std::max<std::size_t>(n, 1);
  const double persistence = p.alpha + p.beta;
  if (!(persistence < 1.0) || !(p.omega > 0.0)) throw DataError("invalid spillover parameters");
  GarchSample out;
  out.returns.resize(n);
  out.variance.resize(n);
  out.shocks = shocks;
  double s2 = (p.omega + p.gamma1 + p.gamma2 * crisis_share) / (1.0 - persistence);
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) {
      const double x = e_fin[t - 1] * e_fin[t - 1];
      s2 = p.omega + p.alpha * out.returns[t - 1] * out.returns[t - 1] + p.beta * s2 +
           (p.gamma1 + (crisis[t - 1] ? p.gamma2 : 0.0)) * x;
      if (!(s2 > 0.0)) throw NumericalError("simulated spillover variance is not positive");
    }
    out.variance[t] = s2;
    out.returns[t] = std::sqrt(s2) * shocks[t];
  }
  return out;
}

/// Lower-tail dependence through a shared uniform: with probability lambda the
/// industry reuses the financial sector's uniform, otherwise draws its own.
/// P(both below alpha) = alpha^2 + lambda alpha (1 - alpha).
inline double joint_exceedance_probability(double alpha, double lambda) {
  return alpha * alpha + lambda * alpha * (1.0 - alpha);
}

/// Crisis positions [begin_frac T, end_frac T) mapped to an inclusive date window.
inline CrisisWindow interior_crisis(const TradingCalendar& cal, double begin_frac = 0.6, double end_frac = 0.8) {
  const auto n = static_cast<double>(cal.size());
  const auto b = static_cast<std::size_t>(std::floor(begin_frac * n));
  const auto e = static_cast<std::size_t>(std::floor(end_frac * n));
  if (b >= e || e > cal.size()) throw DataError("crisis window does not fit the calendar");
  return CrisisWindow(cal.date(b), cal.date(e - 1));
}

inline std::string sector_id(int i) {
  std::string id = std::to_string(i);
  return "I" + std::string(id.size() < 2 ? 2 - id.size() : 0, '0') + id;
}

/// Panel with the sector columns reordered by id.
inline ReturnsPanel sorted_panel(const TradingCalendar& cal, const std::vector<std::string>& ids,
                                 std::vector<std::vector<double>> cols, const std::string& financial_id) {
  std::vector<std::size_t> order(ids.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ids[a] < ids[b]; });
  std::vector<std::string> sorted_ids;
  std::vector<std::vector<double>> sorted_cols;
  for (auto k : order) {
    sorted_ids.push_back(ids[k]);
    sorted_cols.push_back(std::move(cols[k]));
  }
  return ReturnsPanel(cal, std::move(sorted_ids), std::move(sorted_cols), financial_id);
}

// ---------------------------------------------------------------------------
// Daily returns panel: VAR(1) mean, GARCH financial sector, spillover GARCH
// industries, tail-dependent innovations.

struct ReturnsDgp {
  std::uint64_t seed = 1;
  Date first = make_date(2001, 1, 1);
  Date last = make_date(2011, 12, 31);
  int industries = 73;
  std::string financial_id = "FIN";
  double scale = 0.01;  // unit-variance process times scale = daily return
  GarchParams financial{0.05, 0.08, 0.87, std::nullopt};
  SpilloverParams industry{0.05, 0.05, 0.85, 0.0, 0.0, std::nullopt};
  double gamma1_loaded = 0.04;  // applied to every `loaded_every`-th industry
  double gamma2_loaded = 0.04;
  int loaded_every = 3;
  double ar_fin = 0.05;       // r_fin[t] on r_fin[t-1]
  double ar_industry = 0.05;  // r_i[t] on r_i[t-1]
  double cross = 0.10;        // r_i[t] on r_fin[t-1]
  double lambda_normal = 0.10;
  double lambda_crisis = 0.40;
  double crisis_begin = 0.6;
  double crisis_end = 0.8;
  std::optional<CrisisWindow> crisis;  // overrides the fractional window
};

struct ReturnsSample {
  ReturnsPanel panel;
  CrisisWindow crisis;
  json truth;
};

inline ReturnsSample sim_var_garch_spillover(const ReturnsDgp& spec) {
  const auto cal = TradingCalendar::weekdays(spec.first, spec.last);
  const std::size_t n = cal.size();
  if (n < 300) throw DataError("simulated sample too short");
  const auto window = spec.crisis ? *spec.crisis : interior_crisis(cal, spec.crisis_begin, spec.crisis_end);
  const auto crisis = crisis_indicator(cal, window);

  Rng fin_rng(spec.seed, stream::id(stream::returns, 0));
  // Financial uniforms drive both its innovations and the shared tail draws.
  std::vector<double> u_fin(n);
  for (auto& u : u_fin) u = fin_rng.uniform();
  std::vector<double> z_fin(n);
  for (std::size_t t = 0; t < n; ++t) z_fin[t] = normal_quantile(u_fin[t]);
  // Financial GARCH driven by the given shocks.
  std::vector<double> eps_fin(n);
  {
    double s2 = spec.financial.unconditional_variance();
    for (std::size_t t = 0; t < n; ++t) {
      if (t > 0) s2 = spec.financial.omega + spec.financial.alpha * eps_fin[t - 1] * eps_fin[t - 1] + spec.financial.beta * s2;
      eps_fin[t] = std::sqrt(s2) * z_fin[t];
    }
  }
  std::vector<double> r_fin(n);
  for (std::size_t t = 0; t < n; ++t) r_fin[t] = (t > 0 ? spec.ar_fin * r_fin[t - 1] : 0.0) + eps_fin[t];

  std::vector<std::string> ids;
  std::vector<std::vector<double>> cols;
  json industries = json::array();
  for (int i = 0; i < spec.industries; ++i) {
    Rng rng(spec.seed, stream::id(stream::returns, static_cast<std::uint64_t>(i) + 1));
    std::vector<double> z(n);
    for (std::size_t t = 0; t < n; ++t) {
      const double lambda = crisis[t] ? spec.lambda_crisis : spec.lambda_normal;
      const double shared = rng.uniform();
      const double own = rng.uniform();
      z[t] = normal_quantile(shared < lambda ? u_fin[t] : own);
    }
    SpilloverParams p = spec.industry;
    const bool loaded = spec.loaded_every > 0 && i % spec.loaded_every == 0;
    if (loaded) {
      p.gamma1 = spec.gamma1_loaded;
      p.gamma2 = spec.gamma2_loaded;
    }
    const auto sample = simulate_spillover_industry(p, z_fin, crisis, z);
    std::vector<double> r(n);
    for (std::size_t t = 0; t < n; ++t)
      r[t] = spec.scale * ((t > 0 ? spec.ar_industry * r[t - 1] / spec.scale + spec.cross * r_fin[t - 1] : 0.0) +
                           sample.returns[t]);
    ids.push_back(sector_id(i));
    cols.push_back(std::move(r));
    const double s2 = spec.scale * spec.scale;
    industries.push_back({{"id", ids.back()},
                          {"omega", p.omega * s2},
                          {"alpha", p.alpha},
                          {"beta", p.beta},
                          {"gamma1", p.gamma1 * s2},
                          {"gamma2", p.gamma2 * s2},
                          {"spillover", loaded && p.gamma1 > 0.0}});
  }
  for (auto& v : r_fin) v *= spec.scale;
  ids.push_back(spec.financial_id);
  cols.push_back(std::move(r_fin));
  ReturnsSample out{sorted_panel(cal, ids, std::move(cols), spec.financial_id), window, {}};
  const double s2 = spec.scale * spec.scale;
  out.truth = {{"seed", spec.seed},
               {"days", n},
               {"crisis_start", format_date(window.start)},
               {"crisis_end", format_date(window.end)},
               {"financial",
                {{"id", spec.financial_id},
                 {"omega", spec.financial.omega * s2},
                 {"alpha", spec.financial.alpha},
                 {"beta", spec.financial.beta}}},
               {"var", {{"ar_fin", spec.ar_fin}, {"ar_industry", spec.ar_industry}, {"cross", spec.cross}}},
               {"tail", {{"lambda_normal", spec.lambda_normal}, {"lambda_crisis", spec.lambda_crisis}}},
               {"industries", industries}};
  return out;
}

// ---------------------------------------------------------------------------
// Tail dependence oracle

struct TailDependenceSpec {
  std::uint64_t seed = 1;
  std::size_t days = 2870;
  int industries = 1;
  double alpha = 0.05;
  double lambda = 0.0;         // outside the crisis
  double lambda_crisis = 0.0;  // inside [crisis_begin, crisis_end) of the sample
  double crisis_begin = 0.6;
  double crisis_end = 0.8;
  std::string financial_id = "FIN";
};

struct TailDependenceSample {
  ReturnsPanel panel;
  CrisisWindow crisis;
  double expected_prob = 0.0;
  double expected_prob_crisis = 0.0;
  double expected_prob_non_crisis = 0.0;
  json truth;
};

/// Returns are scaled normal quantiles of the copula uniforms, so the lower
/// alpha tail of each series is exceeded with probability alpha.
inline TailDependenceSample sim_tail_dependence(const TailDependenceSpec& spec) {
  for (double l : {spec.lambda, spec.lambda_crisis}) {
    if (!(l >= 0.0 && l <= 1.0)) throw DataError("infeasible tail dependence weight");
  }
  std::vector<Date> dates;
  std::chrono::sys_days day{make_date(1990, 1, 1)};
  while (dates.size() < spec.days) {
    dates.emplace_back(day);
    day += std::chrono::days{1};
  }
  TradingCalendar cal(std::move(dates));
  const auto window = interior_crisis(cal, spec.crisis_begin, spec.crisis_end);
  const auto crisis = crisis_indicator(cal, window);
  const std::size_t n = spec.days;
  Rng fin_rng(spec.seed, stream::id(stream::tail, 0));
  std::vector<double> u_fin(n);
  for (auto& u : u_fin) u = fin_rng.uniform();
  std::vector<std::string> ids;
  std::vector<std::vector<double>> cols;
  for (int i = 0; i < spec.industries; ++i) {
    Rng rng(spec.seed, stream::id(stream::tail, static_cast<std::uint64_t>(i) + 1));
    std::vector<double> r(n);
    for (std::size_t t = 0; t < n; ++t) {
      const double lambda = crisis[t] ? spec.lambda_crisis : spec.lambda;
      const double shared = rng.uniform();
      const double own = rng.uniform();
      r[t] = 0.01 * normal_quantile(shared < lambda ? u_fin[t] : own);
    }
    ids.push_back(sector_id(i));
    cols.push_back(std::move(r));
  }
  std::vector<double> fin(n);
  for (std::size_t t = 0; t < n; ++t) fin[t] = 0.01 * normal_quantile(u_fin[t]);
  ids.push_back(spec.financial_id);
  cols.push_back(std::move(fin));

  TailDependenceSample out{sorted_panel(cal, ids, std::move(cols), spec.financial_id), window, 0.0, 0.0, 0.0, {}};
  double n_crisis = 0.0;
  for (bool c : crisis) n_crisis += c ? 1.0 : 0.0;
  const double share = n_crisis / static_cast<double>(n);
  out.expected_prob_crisis = joint_exceedance_probability(spec.alpha, spec.lambda_crisis);
  out.expected_prob_non_crisis = joint_exceedance_probability(spec.alpha, spec.lambda);
  out.expected_prob = share * out.expected_prob_crisis + (1.0 - share) * out.expected_prob_non_crisis;
  out.truth = {{"seed", spec.seed},
               {"alpha", spec.alpha},
               {"lambda", spec.lambda},
               {"lambda_crisis", spec.lambda_crisis},
               {"expected_prob", out.expected_prob},
               {"expected_prob_crisis", out.expected_prob_crisis},
               {"expected_prob_non_crisis", out.expected_prob_non_crisis}};
  return out;
}

// ---------------------------------------------------------------------------
// Poisson count panel

struct PoissonDgp {
  std::uint64_t seed = 1;
  int industries = 73;
  Quarter first{2001, 1};
  int quarters = 44;
  CrisisWindow crisis;
  double intercept = 0.3;
  // Coefficients on the lagged regressors; split variables list both regimes.
  std::map<std::string, double> beta{{"ND_I", 0.25}, {"VOLP", 0.2}, {"DEBT_COST", 0.15},
                                     {"EP", -0.1},   {"SIZE", -0.1}, {"INV_I", -0.15}};
  std::map<std::string, std::pair<double, double>> split_beta{{"VAL_I", {-0.25, -0.45}}};  // non-crisis, crisis
  double industry_effect_sd = 0.4;
  double time_effect_sd = 0.2;
  double rho_x = 0.8;
  double x_clip = 3.0;
};

struct PoissonSample {
  IndustryQuarterPanel panel;
  std::map<std::string, double> truth_columns;  // design column name -> coefficient
  json truth;
};

/// Regressors are standardized AR(1) processes per industry (clipped); counts
/// are Poisson with log mean intercept + industry + time effects + X_{t-1} beta.
inline PoissonSample sim_poisson_panel(const PoissonDgp& spec) {
  std::vector<std::string> vars;
  for (const auto& [name, b] : spec.beta) vars.push_back(name);
  for (const auto& [name, b] : spec.split_beta) vars.push_back(name);
  Rng fx(spec.seed, stream::id(stream::poisson, 0));
  std::vector<double> ind_eff(static_cast<std::size_t>(spec.industries));
  for (auto& e : ind_eff) e = spec.industry_effect_sd * fx.normal();
  std::vector<double> time_eff(static_cast<std::size_t>(spec.quarters));
  for (auto& e : time_eff) e = spec.time_effect_sd * fx.normal();
  const double innov_sd = std::sqrt(1.0 - spec.rho_x * spec.rho_x);

  std::vector<IndustryQuarter> rows;
  for (int i = 0; i < spec.industries; ++i) {
    Rng rng(spec.seed, stream::id(stream::poisson, static_cast<std::uint64_t>(i) + 1));
    std::map<std::string, double> x;
    for (const auto& v : vars) x[v] = rng.normal();
    std::map<std::string, double> x_prev = x;  // value at t-1, pre-sample for t = 0
    for (int q = 0; q < spec.quarters; ++q) {
      for (const auto& v : vars) x[v] = std::clamp(spec.rho_x * x_prev[v] + innov_sd * rng.normal(), -spec.x_clip, spec.x_clip);
      const Quarter quarter = spec.first.offset(q);
      const bool crisis_prev = spec.crisis.contains(spec.first.offset(q - 1));
      double eta = spec.intercept + ind_eff[static_cast<std::size_t>(i)] + time_eff[static_cast<std::size_t>(q)];
      for (const auto& [name, b] : spec.beta) eta += b * x_prev[name];
      for (const auto& [name, bb] : spec.split_beta) eta += (crisis_prev ? bb.second : bb.first) * x_prev[name];
      IndustryQuarter r;
      r.industry = sector_id(i);
      r.quarter = quarter;
      r.ccx = static_cast<double>(rng.poisson(std::exp(eta)));
      r.nd_i = x["ND_I"];
      r.val_i = x["VAL_I"];
      r.inv_i = x["INV_I"];
      r.volp = x["VOLP"];
      r.lev = rng.normal();
      r.debt_cost = x["DEBT_COST"];
      r.ep = x["EP"];
      r.ni = rng.normal();
      r.size = x["SIZE"];
      rows.push_back(std::move(r));
      x_prev = x;
    }
  }
  PoissonSample out{IndustryQuarterPanel(std::move(rows)), {}, {}};
  for (const auto& [name, b] : spec.beta) out.truth_columns[name] = b;
  for (const auto& [name, bb] : spec.split_beta) {
    out.truth_columns[name + "*non-crisis"] = bb.first;
    out.truth_columns[name + "*crisis"] = bb.second;
  }
  out.truth = {{"seed", spec.seed}, {"intercept", spec.intercept}, {"coefficients", out.truth_columns}};
  return out;
}

// ---------------------------------------------------------------------------
// Firm accounting panel

struct AccountingDgp {
  std::uint64_t seed = 1;
  std::vector<std::string> industries;
  int firms_per_industry = 8;
  Quarter first{1997, 1};  // includes burn-in for lags and rolling windows
  Quarter last{2011, 4};
  // a..g for log(M/B) on [1, 1/(1+AGE), DIV, LEV, log SIZE, VOLP, ROE].
  std::vector<double> valuation{0.4, 0.8, 0.1, -0.6, 0.05, -2.0, 3.0};
  // a..g for log(CAPX / PPE_{t-1}) on [1, TOBINQ, DIV, LEV, log SIZE, VOLP, ROE].
  std::vector<double> investment{-2.5, 0.2, -0.05, -0.4, 0.03, -1.0, 1.5};
  double valuation_noise = 0.0;
  double investment_noise = 0.0;
};

struct AccountingSample {
  std::vector<FirmQuarter> rows;
  json truth;
};

/// Firm-quarter accounting rows whose market equity and capital expenditures
/// follow the valuation and investment equations exactly, plus optional noise.
inline AccountingSample sim_accounting_panel(const AccountingDgp& spec) {
  if (spec.valuation.size() != 7 || spec.investment.size() != 7) throw DataError("spread models need 7 coefficients");
  if (spec.last < spec.first) throw DataError("empty accounting window");
  const int n_q = spec.last.index() - spec.first.index() + 1;
  std::vector<FirmQuarter> rows;
  std::vector<double> val_noise, inv_noise;
  for (std::size_t k = 0; k < spec.industries.size(); ++k) {
    Rng ind_rng(spec.seed, stream::id(stream::accounting, k << 8));
    const double roe_vol = ind_rng.uniform(0.005, 0.04);
    const double roe_mean = ind_rng.uniform(-0.01, 0.04);
    for (int f = 0; f < spec.firms_per_industry; ++f) {
      Rng rng(spec.seed, stream::id(stream::accounting, (k << 8) + static_cast<std::uint64_t>(f) + 1));
      const std::string firm = spec.industries[k] + "F" + std::to_string(f + 1);
      double log_at = rng.normal(6.0, 1.0);
      double lev = rng.uniform(0.05, 0.5);
      double be_share = rng.uniform(0.3, 0.6);
      double roe = roe_mean;
      double age = rng.uniform(1.0, 40.0);
      double div = rng.bernoulli(0.6) ? 1.0 : 0.0;
      const double shares = rng.uniform(10.0, 500.0);
      const double ppe_share = rng.uniform(0.15, 0.5);
      double ltd_prev = lev * std::exp(log_at);
      for (int q = 0; q < n_q; ++q) {
        const Quarter quarter = spec.first.offset(q);
        log_at += rng.normal(0.01, 0.04);
        lev = std::clamp(lev + rng.normal(0.0, 0.02), 0.02, 0.8);
        be_share = std::clamp(be_share + rng.normal(0.0, 0.02), 0.1, 0.9);
        roe = roe_mean + 0.5 * (roe - roe_mean) + roe_vol * rng.normal();
        age += 0.25;
        if (rng.bernoulli(0.1)) div = 1.0 - div;
        FirmQuarter r;
        r.firm = firm;
        r.industry = spec.industries[k];
        r.quarter = quarter;
        r.at = std::exp(log_at);
        r.ltd = lev * r.at;
        r.be = be_share * r.at;
        r.earn = roe * r.be;  // ROE against lagged book equity is close but not identical
        r.div_flag = div;
        r.age = age;
        r.shares = shares;
        r.ppe = ppe_share * r.at;
        r.rf = 0.02 + 0.015 * std::sin(0.3 * q);
        r.debt_face = r.ltd + 0.1 * r.at;
        const double d_ltd = r.ltd - ltd_prev;
        r.ltd_iss = std::max(d_ltd, 0.0) + 0.01 * r.at * rng.uniform();
        r.ltd_red = std::max(-d_ltd, 0.0) + 0.01 * r.at * rng.uniform();
        ltd_prev = r.ltd;
        r.me = r.be;     // placeholder until the valuation pass
        r.capx = r.ppe;  // placeholder until the investment pass
        val_noise.push_back(spec.valuation_noise * rng.normal());
        inv_noise.push_back(spec.investment_noise * rng.normal());
        rows.push_back(std::move(r));
      }
    }
  }

  // ROE and VOLP do not depend on market equity or investment, so one pass fixes them.
  auto vars = derive_firm_variables(rows);
  const auto& a = spec.valuation;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& v = vars[i];
    double lmb = a[0] + a[1] * v.inv_age + a[2] * v.div + a[3] * v.lev + a[4] * v.log_size;
    // Rows without ROE or VOLP (burn-in) get a plain ratio; they never enter a fit.
    if (std::isfinite(v.roe) && std::isfinite(v.volp)) lmb += a[5] * v.volp + a[6] * v.roe;
    rows[i].me = rows[i].be * std::exp(lmb + val_noise[i]);
  }
  vars = derive_firm_variables(rows);
  const auto& b = spec.investment;
  std::map<std::pair<std::string, int>, std::size_t> index;
  for (std::size_t i = 0; i < rows.size(); ++i) index[{rows[i].firm, rows[i].quarter.index()}] = i;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& v = vars[i];
    auto prev = index.find({rows[i].firm, rows[i].quarter.index() - 1});
    const double ppe_prev = prev == index.end() ? rows[i].ppe : rows[prev->second].ppe;
    double li = b[0] + b[1] * v.tobinq + b[2] * v.div + b[3] * v.lev + b[4] * v.log_size;
    if (std::isfinite(v.roe) && std::isfinite(v.volp)) li += b[5] * v.volp + b[6] * v.roe;
    rows[i].capx = ppe_prev * std::exp(li + inv_noise[i]);
  }
  AccountingSample out{std::move(rows), {}};
  out.truth = {{"seed", spec.seed},
               {"firms_per_industry", spec.firms_per_industry},
               {"valuation", spec.valuation},
               {"investment", spec.investment},
               {"valuation_noise", spec.valuation_noise},
               {"investment_noise", spec.investment_noise}};
  return out;
}

// ---------------------------------------------------------------------------
// HHI covariates

struct HhiDgp {
  std::uint64_t seed = 1;
  std::vector<std::string> industries;
  int first_year = 2001;
  int last_year = 2011;
  std::vector<int> census_years{2002, 2007};
  Eigen::Vector4d coef{0.02, 0.9, 0.002, -0.01};
  double noise = 0.01;
};

struct HhiSample {
  std::vector<HhiRow> rows;
  json truth;
};

inline HhiSample sim_hhi(const HhiDgp& spec) {
  std::vector<HhiRow> rows;
  for (std::size_t k = 0; k < spec.industries.size(); ++k) {
    Rng rng(spec.seed, stream::id(stream::hhi, k));
    double pub = rng.uniform(0.02, 0.4);
    double bls = rng.uniform(5.0, 50.0);
    double pemp = rng.uniform(0.05, 5.0);
    for (int year = spec.first_year; year <= spec.last_year; ++year) {
      pub = std::clamp(pub + rng.normal(0.0, 0.01), 0.01, 0.6);
      bls = std::max(1.0, bls + rng.normal(0.0, 0.5));
      pemp = std::max(0.01, pemp + rng.normal(0.0, 0.05));
      HhiRow r;
      r.industry = spec.industries[k];
      r.year = year;
      r.public_hhi = pub;
      r.bls_emp_per_firm = bls;
      r.public_emp_per_firm = pemp;
      const double noise = spec.noise * rng.normal();
      if (std::find(spec.census_years.begin(), spec.census_years.end(), year) != spec.census_years.end())
        r.census_hhi = spec.coef[0] + spec.coef[1] * pub + spec.coef[2] * bls + spec.coef[3] * pemp + noise;
      rows.push_back(r);
    }
  }
  HhiSample out{std::move(rows), {}};
  out.truth = {{"seed", spec.seed},
               {"coefficients", {spec.coef[0], spec.coef[1], spec.coef[2], spec.coef[3]}},
               {"noise", spec.noise},
               {"census_years", spec.census_years}};
  return out;
}

// ---------------------------------------------------------------------------
// Firm daily equity returns for distance-to-default

struct FirmReturnRow {
  std::string firm;
  std::vector<double> returns;  // aligned with the calendar
};

/// Each firm's return is its industry's return plus idiosyncratic noise.
inline std::vector<FirmReturnRow> sim_firm_returns(const ReturnsPanel& panel, const std::vector<std::string>& firms,
                                                   const std::map<std::string, std::string>& industry_of,
                                                   std::uint64_t seed, double idio_sd = 0.01) {
  std::vector<FirmReturnRow> out;
  for (std::size_t f = 0; f < firms.size(); ++f) {
    Rng rng(seed, stream::id(stream::firm_returns, f));
    auto it = industry_of.find(firms[f]);
    if (it == industry_of.end()) throw DataError("firm " + firms[f] + " has no industry");
    const auto col = panel.column(it->second);
    FirmReturnRow row{firms[f], std::vector<double>(col.size())};
    for (std::size_t t = 0; t < col.size(); ++t) row.returns[t] = col[t] + idio_sd * rng.normal();
    out.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear panel with AR(1) errors for Prais-Winsten checks

struct ArPanelDgp {
  std::uint64_t seed = 1;
  int panels = 4;
  int periods = 2000;
  double rho = 0.6;
  Eigen::VectorXd beta = (Eigen::VectorXd(3) << 1.0, 0.5, -0.3).finished();  // intercept, x1, x2
  double error_sd = 1.0;
};

inline PanelDesign sim_ar_panel(const ArPanelDgp& spec) {
  const auto k = spec.beta.size();
  PanelDesign d;
  const auto n = static_cast<Eigen::Index>(spec.panels) * spec.periods;
  d.x.resize(n, k);
  d.y.resize(n);
  d.columns.emplace_back("cons");
  d.kinds.push_back(ColumnKind::intercept);
  for (Eigen::Index j = 1; j < k; ++j) {
    d.columns.push_back("x" + std::to_string(j));
    d.kinds.push_back(ColumnKind::variable);
  }
  Eigen::Index row = 0;
  for (int i = 0; i < spec.panels; ++i) {
    Rng rng(spec.seed, stream::id(stream::ar_panel, static_cast<std::uint64_t>(i)));
    double e = spec.error_sd * rng.normal() / std::sqrt(1.0 - spec.rho * spec.rho);
    for (int t = 0; t < spec.periods; ++t, ++row) {
      if (t > 0) e = spec.rho * e + spec.error_sd * rng.normal();
      d.x(row, 0) = 1.0;
      for (Eigen::Index j = 1; j < k; ++j) d.x(row, j) = rng.normal();
      d.y[row] = d.x.row(row).dot(spec.beta) + e;
      d.cluster.push_back(i);
      d.period.push_back(t);
    }
    d.cluster_names.push_back(sector_id(i));
  }
  d.z = d.x;
  d.instruments = d.columns;
  return d;
}

}  // namespace spillover
