#pragma once

// Quarterly industry characteristics built from firm accounting rows: net debt
// financing, spread valuation and investment from rolling pooled regressions,
// profit volatility, aggregate ratios, and the fitted-HHI competition classes.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spillover/calendar.hpp"
#include "spillover/csv.hpp"
#include "spillover/error.hpp"
#include "spillover/numeric.hpp"
#include "spillover/panel.hpp"

namespace spillover {

/// Sum of issuance minus reduction over the sum of total assets.
inline double net_debt_financing(std::span<const FirmQuarter> firms) {
  double flow = 0.0;
  double assets = 0.0;
  for (const auto& f : firms) {
    if (!std::isfinite(f.ltd_iss) || !std::isfinite(f.ltd_red) || !std::isfinite(f.at)) continue;
    flow += f.ltd_iss - f.ltd_red;
    assets += f.at;
  }
  if (!(assets > 0.0)) throw DataError("net debt financing: zero total assets");
  return flow / assets;
}

/// Residual variance (divisor n - 2) of the pooled regression of ROE on lagged ROE.
inline double volp(std::span<const double> roe, std::span<const double> roe_lag) {
  if (roe.size() != roe_lag.size()) throw DataError("VOLP: ROE and lagged ROE differ in length");
  const auto n = static_cast<Eigen::Index>(roe.size());
  if (n < 6) throw DataError("VOLP: insufficient rows");
  Eigen::MatrixXd x(n, 2);
  x.col(0).setOnes();
  x.col(1) = as_eigen(roe_lag);
  const auto fit = least_squares(x, as_eigen(roe), "VOLP");
  const double v = fit.rss / static_cast<double>(n - 2);
  // An exact fit leaves rounding noise only.
  return v < 1e-28 * std::max(1.0, as_eigen(roe).squaredNorm()) ? 0.0 : v;
}

/// Firm-level regression inputs derived from the accounting panel.
struct FirmVariables {
  std::size_t row = 0;  // index into the firm rows
  std::string firm;
  std::string industry;
  Quarter quarter;
  double log_mb = kMissing;   // log(me / be), be > 0 only
  double inv_age = kMissing;  // 1 / (1 + age)
  double div = kMissing;
  double lev = kMissing;      // ltd / at
  double log_size = kMissing; // log(at)
  double roe = kMissing;      // earn / be four quarters earlier, winsorized
  double volp = kMissing;     // industry value, winsorized
  double tobinq = kMissing;   // (me + at - be) / at
  double log_inv = kMissing;  // log(capx / ppe of the previous quarter)
};

struct DerivedOptions {
  int volp_window = 12;
  double winsor_lower = 0.01;
  double winsor_upper = 0.99;
};

namespace detail {

using FirmKey = std::pair<std::string, int>;  // firm, quarter index

inline bool finite_all(std::initializer_list<double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace detail

/// Industry VOLP per quarter, computed on the trailing window ending at that
/// quarter. Needs two firms and three quarters of (ROE, lagged ROE) pairs.
inline std::map<std::pair<std::string, Quarter>, double> industry_volp(const std::vector<FirmVariables>& vars,
                                                                       int window) {
  std::map<detail::FirmKey, double> roe;
  std::map<std::string, std::set<int>> industry_quarters;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (std::isfinite(vars[i].roe)) roe[{vars[i].firm, vars[i].quarter.index()}] = vars[i].roe;
    industry_quarters[vars[i].industry].insert(vars[i].quarter.index());
    members[vars[i].industry].push_back(i);
  }
  std::map<std::pair<std::string, Quarter>, double> out;
  for (const auto& [industry, quarters] : industry_quarters) {
    for (int q : quarters) {
      std::vector<double> y, ylag;
      std::set<std::string> firms;
      std::set<int> used_quarters;
      for (auto i : members[industry]) {
        const int s = vars[i].quarter.index();
        if (s > q || s <= q - window) continue;
        auto cur = roe.find({vars[i].firm, s});
        auto prev = roe.find({vars[i].firm, s - 1});
        if (cur == roe.end() || prev == roe.end()) continue;
        y.push_back(cur->second);
        ylag.push_back(prev->second);
        firms.insert(vars[i].firm);
        used_quarters.insert(s);
      }
      double v = kMissing;
      if (firms.size() >= 2 && used_quarters.size() >= 3) {
        try {
          v = volp(y, ylag);
        } catch (const Error&) {
          v = kMissing;
        }
      }
      out[{industry, Quarter::from_index(q)}] = v;
    }
  }
  return out;
}

/// Derives the firm regressors. ROE and VOLP are winsorized across the whole panel.
inline std::vector<FirmVariables> derive_firm_variables(const std::vector<FirmQuarter>& rows,
                                                        const DerivedOptions& options = {}) {
  std::map<detail::FirmKey, std::size_t> index;
  for (std::size_t i = 0; i < rows.size(); ++i) index[{rows[i].firm, rows[i].quarter.index()}] = i;
  auto lagged = [&](const FirmQuarter& f, int k) -> const FirmQuarter* {
    auto it = index.find({f.firm, f.quarter.index() - k});
    return it == index.end() ? nullptr : &rows[it->second];
  };

  std::vector<FirmVariables> vars(rows.size());
  std::vector<double> roe(rows.size(), kMissing);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& f = rows[i];
    auto& v = vars[i];
    v.row = i;
    v.firm = f.firm;
    v.industry = f.industry;
    v.quarter = f.quarter;
    if (f.me > 0.0 && f.be > 0.0) v.log_mb = std::log(f.me / f.be);
    if (std::isfinite(f.age)) v.inv_age = 1.0 / (1.0 + f.age);
    v.div = f.div_flag;
    if (f.at > 0.0) {
      if (std::isfinite(f.ltd)) v.lev = f.ltd / f.at;
      v.log_size = std::log(f.at);
      if (detail::finite_all({f.me, f.be})) v.tobinq = (f.me + f.at - f.be) / f.at;
    }
    if (const auto* y = lagged(f, 4); y && y->be > 0.0 && std::isfinite(f.earn)) roe[i] = f.earn / y->be;
    if (const auto* p = lagged(f, 1); p && p->ppe > 0.0 && f.capx > 0.0) v.log_inv = std::log(f.capx / p->ppe);
  }
  roe = winsorize_finite(roe, options.winsor_lower, options.winsor_upper);
  for (std::size_t i = 0; i < rows.size(); ++i) vars[i].roe = roe[i];

  auto volp_map = industry_volp(vars, options.volp_window);
  std::vector<double> volp_values;
  for (const auto& [key, v] : volp_map) volp_values.push_back(v);
  volp_values = winsorize_finite(volp_values, options.winsor_lower, options.winsor_upper);
  std::size_t k = 0;
  for (auto& [key, v] : volp_map) v = volp_values[k++];
  for (auto& v : vars) v.volp = volp_map[{v.industry, v.quarter}];
  return vars;
}

enum class SpreadModel { valuation, investment };

struct RollingRegressionFit {
  Quarter first;  // first window quarter (t - 12)
  Quarter last;   // last window quarter (t - 1)
  Eigen::VectorXd coef;  // a..g
  Eigen::VectorXd se;
  std::size_t rows = 0;
  double rss = 0.0;
  double r2 = 0.0;
};

namespace detail {

inline constexpr int kSpreadCoefficients = 7;

/// Response and regressors of the chosen model, or nullopt when a field is missing.
inline std::optional<std::pair<double, Eigen::Matrix<double, 1, 7>>> spread_row(const FirmVariables& v,
                                                                               SpreadModel model) {
  const double y = model == SpreadModel::valuation ? v.log_mb : v.log_inv;
  const double first = model == SpreadModel::valuation ? v.inv_age : v.tobinq;
  if (!finite_all({y, first, v.div, v.lev, v.log_size, v.volp, v.roe})) return std::nullopt;
  Eigen::Matrix<double, 1, 7> x;
  x << 1.0, first, v.div, v.lev, v.log_size, v.volp, v.roe;
  return std::make_pair(y, x);
}

}  // namespace detail

/// Pooled least squares over the supplied rows (one industry, one window).
/// Rows with missing fields, non-positive book equity (valuation) or missing
/// investment rates are skipped; fewer than 3 rows per coefficient is an error.
inline RollingRegressionFit fit_spread_model(std::span<const FirmVariables> window, SpreadModel model) {
  std::vector<double> y;
  std::vector<Eigen::Matrix<double, 1, 7>> xs;
  RollingRegressionFit fit;
  bool first = true;
  for (const auto& v : window) {
    auto r = detail::spread_row(v, model);
    if (!r) continue;
    y.push_back(r->first);
    xs.push_back(r->second);
    if (first || v.quarter < fit.first) fit.first = v.quarter;
    if (first || fit.last < v.quarter) fit.last = v.quarter;
    first = false;
  }
  const auto n = static_cast<Eigen::Index>(y.size());
  if (n < 3 * detail::kSpreadCoefficients) throw DataError("rolling regression: insufficient rows");
  Eigen::MatrixXd full(n, detail::kSpreadCoefficients);
  for (Eigen::Index i = 0; i < n; ++i) full.row(i) = xs[static_cast<std::size_t>(i)];
  // A slope regressor constant over the window (winsorized VOLP, say) is
  // absorbed by the intercept; it gets coefficient zero and NaN standard error.
  std::vector<Eigen::Index> keep{0};
  for (Eigen::Index j = 1; j < detail::kSpreadCoefficients; ++j) {
    const auto c = full.col(j);
    if (c.maxCoeff() - c.minCoeff() > 1e-12 * std::max(1.0, c.cwiseAbs().maxCoeff())) keep.push_back(j);
  }
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) x.col(static_cast<Eigen::Index>(k)) = full.col(keep[k]);
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  const auto ls = least_squares(x, yv, model == SpreadModel::valuation ? "valuation regression" : "investment regression");
  fit.coef = Eigen::VectorXd::Zero(detail::kSpreadCoefficients);
  fit.se = Eigen::VectorXd::Constant(detail::kSpreadCoefficients, kMissing);
  const Eigen::VectorXd se = ls.standard_errors();
  for (std::size_t k = 0; k < keep.size(); ++k) {
    fit.coef[keep[k]] = ls.coef[static_cast<Eigen::Index>(k)];
    fit.se[keep[k]] = se[static_cast<Eigen::Index>(k)];
  }
  fit.rows = static_cast<std::size_t>(n);
  fit.rss = ls.rss;
  const double tss = (yv.array() - yv.mean()).square().sum();
  fit.r2 = tss > 0.0 ? 1.0 - ls.rss / tss : 1.0;
  return fit;
}

inline RollingRegressionFit fit_valuation(std::span<const FirmVariables> window) {
  return fit_spread_model(window, SpreadModel::valuation);
}

inline RollingRegressionFit fit_investment(std::span<const FirmVariables> window) {
  return fit_spread_model(window, SpreadModel::investment);
}

/// Actual minus predicted response for one firm-quarter; NaN when a field is missing.
inline double spread(const RollingRegressionFit& fit, const FirmVariables& v, SpreadModel model) {
  auto r = detail::spread_row(v, model);
  if (!r) return kMissing;
  return r->first - (r->second * fit.coef)(0);
}

inline double spread_valuation(const RollingRegressionFit& fit, const FirmVariables& v) {
  return spread(fit, v, SpreadModel::valuation);
}

inline double spread_investment(const RollingRegressionFit& fit, const FirmVariables& v) {
  return spread(fit, v, SpreadModel::investment);
}

struct FirmSpreads {
  std::vector<double> valuation;   // aligned with the firm variables; winsorized
  std::vector<double> investment;
  std::vector<std::string> log;    // industry-quarters without a usable window
};

/// Rolling spreads: for each industry and quarter t, fit on quarters t-12..t-1
/// and apply to the firms observed at t.
inline FirmSpreads rolling_spreads(const std::vector<FirmVariables>& vars, int window = 12,
                                   const DerivedOptions& options = {}) {
  std::map<std::string, std::map<int, std::vector<std::size_t>>> by_industry;
  for (std::size_t i = 0; i < vars.size(); ++i) by_industry[vars[i].industry][vars[i].quarter.index()].push_back(i);
  FirmSpreads out;
  out.valuation.assign(vars.size(), kMissing);
  out.investment.assign(vars.size(), kMissing);
  for (const auto& [industry, quarters] : by_industry) {
    for (const auto& [q, members] : quarters) {
      std::vector<FirmVariables> win;
      for (int s = q - window; s < q; ++s) {
        auto it = quarters.find(s);
        if (it == quarters.end()) continue;
        for (auto i : it->second) win.push_back(vars[i]);
      }
      for (SpreadModel model : {SpreadModel::valuation, SpreadModel::investment}) {
        RollingRegressionFit fit;
        try {
          fit = fit_spread_model(win, model);
        } catch (const Error& e) {
          out.log.push_back(industry + " " + Quarter::from_index(q).str() + " " +
                            (model == SpreadModel::valuation ? "valuation" : "investment") + ": " + e.what());
          continue;
        }
        auto& target = model == SpreadModel::valuation ? out.valuation : out.investment;
        for (auto i : members) target[i] = spread(fit, vars[i], model);
      }
    }
  }
  out.valuation = winsorize_finite(out.valuation, options.winsor_lower, options.winsor_upper);
  out.investment = winsorize_finite(out.investment, options.winsor_lower, options.winsor_upper);
  return out;
}

// ---------------------------------------------------------------------------
// Fitted HHI and competition classes

struct HhiRow {
  std::string industry;
  int year = 0;
  double census_hhi = kMissing;  // present on training rows only
  double public_hhi = kMissing;
  double bls_emp_per_firm = kMissing;
  double public_emp_per_firm = kMissing;
};

struct HhiModel {
  Eigen::Vector4d coef = Eigen::Vector4d::Zero();  // intercept, public HHI, BLS emp/firm, public emp/firm
  Eigen::Vector4d se = Eigen::Vector4d::Zero();
  std::size_t training_rows = 0;
  std::map<std::pair<std::string, int>, double> fitted;  // NaN when a regressor is missing
  std::vector<std::string> warnings;

  [[nodiscard]] double predict(const HhiRow& r) const {
    if (!detail::finite_all({r.public_hhi, r.bls_emp_per_firm, r.public_emp_per_firm})) return kMissing;
    return coef[0] + coef[1] * r.public_hhi + coef[2] * r.bls_emp_per_firm + coef[3] * r.public_emp_per_firm;
  }
};

inline HhiModel fit_hhi(const std::vector<HhiRow>& rows) {
  std::vector<const HhiRow*> train;
  for (const auto& r : rows) {
    if (detail::finite_all({r.census_hhi, r.public_hhi, r.bls_emp_per_firm, r.public_emp_per_firm}))
      train.push_back(&r);
  }
  if (train.size() < 10) throw DataError("HHI model needs at least 10 training rows");
  const auto n = static_cast<Eigen::Index>(train.size());
  Eigen::MatrixXd x(n, 4);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = *train[static_cast<std::size_t>(i)];
    x.row(i) << 1.0, r.public_hhi, r.bls_emp_per_firm, r.public_emp_per_firm;
    y[i] = r.census_hhi;
  }
  const auto ls = least_squares(x, y, "HHI regression");
  HhiModel model;
  model.coef = ls.coef;
  model.se = ls.standard_errors();
  model.training_rows = train.size();
  for (const auto& r : rows) {
    const double v = model.predict(r);
    if (!std::isfinite(v))
      model.warnings.push_back("missing HHI regressors for " + r.industry + " " + std::to_string(r.year));
    model.fitted[{r.industry, r.year}] = v;
  }
  return model;
}

inline const std::vector<std::string>& hhi_csv_header() {
  static const std::vector<std::string> h{"industry", "year", "census_hhi", "public_hhi", "bls_emp_per_firm",
                                          "public_emp_per_firm"};
  return h;
}

inline std::vector<HhiRow> parse_hhi_csv(const csv::Table& table) {
  table.require_header(hhi_csv_header());
  std::vector<HhiRow> out;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& row = table.row(i);
    const std::string where = " at line " + std::to_string(table.line_number(i));
    HhiRow r;
    r.industry = std::string(row[0]);
    r.year = static_cast<int>(csv::parse_int(row[1], "year" + where));
    r.census_hhi = csv::parse_optional_double(row[2], "census_hhi" + where);
    r.public_hhi = csv::parse_optional_double(row[3], "public_hhi" + where);
    r.bls_emp_per_firm = csv::parse_optional_double(row[4], "bls_emp_per_firm" + where);
    r.public_emp_per_firm = csv::parse_optional_double(row[5], "public_emp_per_firm" + where);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string hhi_csv(const std::vector<HhiRow>& rows) {
  csv::Writer w(hhi_csv_header());
  for (const auto& r : rows) {
    w.row({r.industry, std::to_string(r.year), csv::exact(r.census_hhi), csv::exact(r.public_hhi),
           csv::exact(r.bls_emp_per_firm), csv::exact(r.public_emp_per_firm)});
  }
  return w.str();
}

/// Lowest floor(qN) fitted values are competitive, highest floor(qN) concentrated.
/// Ties are broken by industry id. Industries without a fitted value are middle.
inline std::map<std::string, CompetitionClass> classify(const std::vector<std::pair<std::string, double>>& fitted,
                                                        double q) {
  if (!(q > 0.0 && q < 0.5)) throw DataError("competition quantile must lie in (0, 0.5)");
  std::vector<std::pair<double, std::string>> ranked;
  std::map<std::string, CompetitionClass> out;
  for (const auto& [industry, value] : fitted) {
    out[industry] = CompetitionClass::middle;
    if (std::isfinite(value)) ranked.emplace_back(value, industry);
  }
  std::sort(ranked.begin(), ranked.end());
  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(ranked.size()) + 1e-9));
  for (std::size_t i = 0; i < k; ++i) {
    out[ranked[i].second] = CompetitionClass::competitive;
    out[ranked[ranked.size() - 1 - i].second] = CompetitionClass::concentrated;
  }
  return out;
}

/// Classes recomputed for every year present in the model.
inline std::map<std::pair<std::string, int>, CompetitionClass> classify_by_year(const HhiModel& model, double q) {
  std::map<int, std::vector<std::pair<std::string, double>>> by_year;
  for (const auto& [key, value] : model.fitted) by_year[key.second].emplace_back(key.first, value);
  std::map<std::pair<std::string, int>, CompetitionClass> out;
  for (const auto& [year, list] : by_year) {
    for (const auto& [industry, cls] : classify(list, q)) out[{industry, year}] = cls;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Industry-quarter panel

struct IndustryPanelInputs {
  std::vector<FirmQuarter> firms;
  std::map<std::pair<std::string, Quarter>, int> ccx_counts;
  std::map<std::pair<std::string, int>, CompetitionClass> competition;  // by (industry, year)
  Quarter first;
  Quarter last;
  std::set<std::string> excluded;
};

struct IndustryPanelBuild {
  IndustryQuarterPanel panel;
  std::vector<std::string> log;  // dropped industries and quarters, with reasons
};

/// Aggregates firms to industry-quarters over [first, last]. An industry with
/// any unusable quarter in the window is dropped so the panel stays balanced.
inline IndustryPanelBuild build_industry_panel(const IndustryPanelInputs& in, const DerivedOptions& options = {}) {
  if (in.last < in.first) throw DataError("industry panel window is empty");
  const auto vars = derive_firm_variables(in.firms, options);
  const auto spreads = rolling_spreads(vars, 12, options);

  std::map<std::pair<std::string, int>, std::vector<std::size_t>> cell;  // (industry, quarter index) -> firm rows
  std::set<std::string> industries;
  for (std::size_t i = 0; i < in.firms.size(); ++i) {
    const auto& f = in.firms[i];
    if (in.excluded.count(f.industry)) continue;
    industries.insert(f.industry);
    cell[{f.industry, f.quarter.index()}].push_back(i);
  }

  IndustryPanelBuild out;
  std::vector<IndustryQuarter> rows;
  for (const auto& industry : industries) {
    std::vector<IndustryQuarter> mine;
    std::string problem;
    for (int q = in.first.index(); q <= in.last.index() && problem.empty(); ++q) {
      const Quarter quarter = Quarter::from_index(q);
      auto it = cell.find({industry, q});
      if (it == cell.end()) {
        problem = quarter.str() + ": no firms";
        break;
      }
      std::vector<FirmQuarter> members;
      for (auto i : it->second) members.push_back(in.firms[i]);
      IndustryQuarter r;
      r.industry = industry;
      r.quarter = quarter;
      auto c = in.ccx_counts.find({industry, quarter});
      if (c == in.ccx_counts.end()) {
        problem = quarter.str() + ": no CCX count";
        break;
      }
      r.ccx = c->second;
      try {
        r.nd_i = net_debt_financing(members);
      } catch (const Error& e) {
        problem = quarter.str() + ": " + e.what();
        break;
      }
      double val = 0.0, inv = 0.0;
      int n_val = 0, n_inv = 0;
      double ltd = 0.0, at = 0.0, me = 0.0, earn = 0.0, shares = 0.0, log_me = 0.0;
      int n_me = 0;
      for (auto i : it->second) {
        if (std::isfinite(spreads.valuation[i])) val += spreads.valuation[i], ++n_val;
        if (std::isfinite(spreads.investment[i])) inv += spreads.investment[i], ++n_inv;
        const auto& f = in.firms[i];
        if (detail::finite_all({f.ltd, f.at, f.me, f.earn, f.shares})) {
          ltd += f.ltd;
          at += f.at;
          me += f.me;
          earn += f.earn;
          shares += f.shares;
        }
        if (f.me > 0.0) log_me += std::log(f.me), ++n_me;
      }
      r.val_i = n_val ? val / n_val : kMissing;
      r.inv_i = n_inv ? inv / n_inv : kMissing;
      r.volp = vars[it->second.front()].volp;
      r.lev = at > 0.0 ? ltd / at : kMissing;
      r.debt_cost = ltd + me > 0.0 ? ltd / (ltd + me) : kMissing;
      r.ep = shares > 0.0 ? earn / shares : kMissing;
      r.ni = at > 0.0 ? earn / at : kMissing;
      r.size = n_me ? log_me / n_me : kMissing;
      auto cls = in.competition.find({industry, quarter.year});
      r.competition = cls == in.competition.end() ? CompetitionClass::middle : cls->second;
      for (const auto& name : industry_variable_names()) {
        if (!std::isfinite(industry_variable(r, name))) {
          problem = quarter.str() + ": " + name + " unavailable";
          break;
        }
      }
      mine.push_back(std::move(r));
    }
    if (!problem.empty()) {
      out.log.push_back("dropped industry " + industry + " (" + problem + ")");
      continue;
    }
    rows.insert(rows.end(), mine.begin(), mine.end());
  }
  out.panel = IndustryQuarterPanel(std::move(rows));
  return out;
}

}  // namespace spillover
