#pragma once

// Batch subcommands. Each one reads the inputs named in a RunConfig, writes its
// CSV tables under the output directory and returns a Report that becomes the
// errors_<command>.json manifest.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "spillover/calendar.hpp"
#include "spillover/characteristics.hpp"
#include "spillover/config.hpp"
#include "spillover/csv.hpp"
#include "spillover/econometrics.hpp"
#include "spillover/error.hpp"
#include "spillover/garch.hpp"
#include "spillover/merton.hpp"
#include "spillover/numeric.hpp"
#include "spillover/panel.hpp"
#include "spillover/parallel.hpp"
#include "spillover/synth.hpp"
#include "spillover/tail_risk.hpp"
#include "spillover/var.hpp"

namespace spillover {

/// Outcome of one subcommand.
class Report {
 public:
  explicit Report(std::string command) : command_(std::move(command)) {}

  void output(const std::string& path) { outputs_.push_back(path); }
  void note(std::string text) { notes_.push_back(std::move(text)); }
  void error(const std::string& item, const std::string& message) {
    errors_.push_back({{"item", item}, {"message", message}});
  }
  void fatal(const std::string& message) { fatal_ = message; }

  [[nodiscard]] bool failed() const { return fatal_.has_value(); }
  [[nodiscard]] std::size_t error_count() const { return errors_.size(); }
  [[nodiscard]] const std::vector<std::string>& outputs() const { return outputs_; }
  [[nodiscard]] const std::vector<std::string>& notes() const { return notes_; }

  /// 0 all outputs written, 2 an output was not produced, 3 some rows failed.
  [[nodiscard]] int exit_code() const {
    if (fatal_) return 2;
    return errors_.empty() ? 0 : 3;
  }

  [[nodiscard]] json to_json() const {
    json out = {{"command", command_},
                {"status", fatal_ ? "failed" : (errors_.empty() ? "ok" : "partial")},
                {"outputs", outputs_},
                {"notes", notes_},
                {"errors", errors_}};
    if (fatal_) out["fatal"] = *fatal_;
    return out;
  }

  [[nodiscard]] std::string manifest_name() const { return "errors_" + command_ + ".json"; }

 private:
  std::string command_;
  std::vector<std::string> outputs_;
  std::vector<std::string> notes_;
  json errors_ = json::array();
  std::optional<std::string> fatal_;
};

namespace detail {

inline std::string out_path(const RunConfig& c, const std::string& name) {
  return (std::filesystem::path(c.output) / name).string();
}

inline void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

inline void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write '" + path + "'");
  f << text;
  if (!f) throw DataError("write failed for '" + path + "'");
}

inline void save(Report& report, const std::string& path, const csv::Writer& w) {
  write_text(path, w.str());
  report.output(path);
}

inline void require_file(const std::string& path, const std::string& what) {
  if (!std::filesystem::is_regular_file(path)) throw DataError(what + " file '" + path + "' does not exist");
}

inline std::string flag(bool b) { return b ? "1" : "0"; }

inline ReturnsPanel load_panel(const RunConfig& c) {
  require_file(c.returns, "returns");
  if (c.exclude.count(c.financial_id)) throw DataError("the financial sector cannot be excluded");
  return load_returns_csv(c.returns, c.financial_id).without(c.exclude);
}

/// First quarter of the industry panel: the estimation window plus two quarters of lags.
inline constexpr int kLagQuarters = 2;

}  // namespace detail

// ---------------------------------------------------------------------------
// Firm daily returns (long format: date,firm,return)

struct FirmReturnSeries {
  std::vector<Date> dates;
  std::vector<double> returns;
};

inline std::map<std::string, FirmReturnSeries> parse_firm_returns_csv(const csv::Table& table) {
  table.require_header({"date", "firm", "return"});
  std::map<std::string, std::vector<std::pair<Date, double>>> raw;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& r = table.row(i);
    const std::string where = "return at line " + std::to_string(table.line_number(i));
    raw[std::string(r[1])].emplace_back(parse_date(r[0]), csv::parse_double(r[2], where));
  }
  std::map<std::string, FirmReturnSeries> out;
  for (auto& [firm, obs] : raw) {
    std::sort(obs.begin(), obs.end());
    auto& s = out[firm];
    for (std::size_t k = 0; k < obs.size(); ++k) {
      if (k && obs[k].first == obs[k - 1].first)
        throw DataError("duplicate return for firm " + firm + " on " + format_date(obs[k].first));
      if (!std::isfinite(obs[k].second)) throw DataError("non-finite return for firm " + firm);
      s.dates.push_back(obs[k].first);
      s.returns.push_back(obs[k].second);
    }
  }
  return out;
}

inline std::string firm_returns_csv(const TradingCalendar& calendar, const std::vector<FirmReturnRow>& rows) {
  csv::Writer w({"date", "firm", "return"});
  for (const auto& row : rows) {
    for (std::size_t t = 0; t < row.returns.size(); ++t) {
      if (std::isfinite(row.returns[t])) w.row({format_date(calendar.date(t)), row.firm, csv::exact(row.returns[t])});
    }
  }
  return w.str();
}

// ---------------------------------------------------------------------------
// spillover

struct SpilloverRow {
  std::string industry;
  int lag = 0;
  std::size_t observations = 0;
  SpilloverFit fit;
  std::string error;
};

/// VAR by BIC, GARCH(1,1) on the shock series, spillover GARCH on the response series.
/// With `reverse` the industry shocks drive the financial variance.
inline SpilloverRow estimate_spillover_row(const ReturnsPanel& panel, const std::string& industry, const RunConfig& c) {
  SpilloverRow row;
  row.industry = industry;
  try {
    const auto pair = aligned_pair(panel, industry);
    row.lag = select_lag_bic(pair.financial, pair.industry, c.var_pmax);
    const auto var = fit_var(pair.financial, pair.industry, row.lag);
    const auto cal = pair.calendar.slice(var.first_index, pair.calendar.size());
    const auto crisis = crisis_indicator(cal, c.crisis());
    const auto& shocks = c.reverse ? var.industry_residuals : var.financial_residuals;
    const auto& response = c.reverse ? var.financial_residuals : var.industry_residuals;
    const auto source = fit_garch11(shocks, c.distribution);
    row.fit = fit_spillover(response, source.standardized_residuals, crisis, c.distribution);
    row.observations = response.size();
  } catch (const Error& e) {
    row.error = e.what();
  }
  return row;
}

inline Report cmd_spillover(const RunConfig& c) {
  Report report("spillover");
  try {
    validate(c);
    const auto panel = detail::load_panel(c);
    const auto industries = panel.industries();
    const auto rows = parallel_map(industries.size(), c.workers,
                                   [&](std::size_t i) { return estimate_spillover_row(panel, industries[i], c); });
    csv::Writer w({"industry", "lag", "omega", "alpha", "beta", "gamma1", "t_gamma1", "gamma2", "t_gamma2",
                   "total_crisis", "t_total_crisis", "gamma1_x1000", "gamma2_x1000", "total_crisis_x1000",
                   "normal_spillover", "crisis_amplification", "converged", "observations", "error"});
    for (const auto& r : rows) {
      if (!r.error.empty()) {
        report.error(r.industry, r.error);
        std::vector<std::string> fields(19, "NA");
        fields[0] = r.industry;
        fields[18] = r.error;
        std::replace(fields[18].begin(), fields[18].end(), ',', ';');
        w.row(fields);
        continue;
      }
      const auto& f = r.fit;
      const auto& p = f.params;
      w.row({r.industry, std::to_string(r.lag), csv::fixed6(p.omega), csv::fixed6(p.alpha), csv::fixed6(p.beta),
             csv::fixed6(p.gamma1), csv::fixed6(f.t_gamma1), csv::fixed6(p.gamma2), csv::fixed6(f.t_gamma2),
             csv::fixed6(f.total_crisis_effect), csv::fixed6(f.t_total_crisis_effect), csv::fixed6(1000.0 * p.gamma1),
             csv::fixed6(1000.0 * p.gamma2), csv::fixed6(1000.0 * f.total_crisis_effect),
             detail::flag(f.normal_spillover()), detail::flag(f.crisis_amplification()), detail::flag(f.converged),
             std::to_string(r.observations), ""});
      if (!f.converged) report.note(r.industry + ": optimizer did not converge");
    }
    detail::save(report, detail::out_path(c, c.reverse ? "table4_reverse.csv" : "table4.csv"), w);
  } catch (const std::exception& e) {
    report.fatal(e.what());
  }
  return report;
}

// ---------------------------------------------------------------------------
// ccx

struct CcxRow {
  std::string industry;
  std::vector<LikelihoodReport> reports;                   // one per variant
  std::vector<std::map<Quarter, int>> quarterly;           // one per variant
  std::map<int, double> yearly;                            // contemporaneous
  std::string error;
};

inline const std::vector<CcxVariant>& ccx_variants() {
  static const std::vector<CcxVariant> v{CcxVariant::contemporaneous, CcxVariant::fin_leads, CcxVariant::industry_leads,
                                         CcxVariant::windowed};
  return v;
}

inline CcxRow compute_ccx_row(const ReturnsPanel& panel, const std::string& industry, const RunConfig& c) {
  CcxRow row;
  row.industry = industry;
  try {
    const auto pair = aligned_pair(panel, industry);
    const auto ind = exceedance(pair.calendar, pair.industry, c.alpha);
    const auto fin = exceedance(pair.calendar, pair.financial, c.alpha);
    const std::vector<CcxSeries> series{ccx(ind, fin), ccx_lagged(ind, fin, LeadDirection::fin_leads),
                                        ccx_lagged(ind, fin, LeadDirection::industry_leads),
                                        ccx_windowed(ind, fin, c.ccx_window)};
    for (const auto& s : series) {
      row.reports.push_back(likelihoods(s, c.crisis()));
      std::map<Quarter, int> counts;
      for (const auto& [q, n] : quarterly_counts(s)) counts[q] = n;
      row.quarterly.push_back(std::move(counts));
    }
    row.yearly = yearly_probabilities(series.front());
  } catch (const Error& e) {
    row.error = e.what();
  }
  return row;
}

inline Report cmd_ccx(const RunConfig& c) {
  Report report("ccx");
  try {
    validate(c);
    const auto panel = detail::load_panel(c);
    const auto industries = panel.industries();
    const auto rows = parallel_map(industries.size(), c.workers,
                                   [&](std::size_t i) { return compute_ccx_row(panel, industries[i], c); });

    csv::Writer t5({"industry", "prob", "prob_crisis", "prob_non_crisis", "days", "days_crisis", "wilcoxon_p"});
    csv::Writer variants({"industry", "variant", "prob", "prob_crisis", "prob_non_crisis", "wilcoxon_p"});
    csv::Writer quarterly({"industry", "quarter", "ccx", "ccx_fin_leads", "ccx_industry_leads", "ccx_windowed"});
    std::vector<double> all, crisis, non_crisis;
    for (const auto& r : rows) {
      if (!r.error.empty()) {
        report.error(r.industry, r.error);
        continue;
      }
      const auto& base = r.reports.front();
      t5.row({r.industry, csv::fixed6(base.prob), csv::fixed6(base.prob_crisis), csv::fixed6(base.prob_non_crisis),
              std::to_string(base.n0 + base.n1), std::to_string(base.n0_crisis + base.n1_crisis),
              csv::fixed6(base.wilcoxon.p_value)});
      all.push_back(base.prob);
      crisis.push_back(base.prob_crisis);
      non_crisis.push_back(base.prob_non_crisis);
      for (std::size_t v = 0; v < ccx_variants().size(); ++v) {
        const auto& rep = r.reports[v];
        variants.row({r.industry, to_string(ccx_variants()[v], c.ccx_window), csv::fixed6(rep.prob),
                      csv::fixed6(rep.prob_crisis), csv::fixed6(rep.prob_non_crisis), csv::fixed6(rep.wilcoxon.p_value)});
      }
      for (const auto& [q, n] : r.quarterly.front()) {
        std::vector<std::string> fields{r.industry, q.str(), std::to_string(n)};
        for (std::size_t v = 1; v < r.quarterly.size(); ++v) {
          auto it = r.quarterly[v].find(q);
          fields.push_back(it == r.quarterly[v].end() ? "NA" : std::to_string(it->second));
        }
        quarterly.row(fields);
      }
    }
    csv::Writer summary({"statistic", "value"});
    if (!all.empty()) {
      t5.row({"average", csv::fixed6(mean(all)), csv::fixed6(mean(crisis)), csv::fixed6(mean(non_crisis)), "NA", "NA",
              "NA"});
      const auto test = wilcoxon_one_sided(non_crisis, crisis);
      summary.row({"industries", std::to_string(all.size())});
      summary.row({"difference", csv::fixed6(mean(crisis) - mean(non_crisis))});
      summary.row({"rank_sum", csv::fixed6(test.statistic)});
      summary.row({"p_value", csv::fixed6(test.p_value)});
      summary.row({"exact", detail::flag(test.exact)});
    }
    detail::save(report, detail::out_path(c, "table5.csv"), t5);
    detail::save(report, detail::out_path(c, "table5_test.csv"), summary);
    detail::save(report, detail::out_path(c, "ccx_variants.csv"), variants);
    detail::save(report, c.ccx_counts_path(), quarterly);

    if (!std::filesystem::is_regular_file(c.hhi)) {
      report.note("no HHI file at '" + c.hhi + "', competition table skipped");
      return report;
    }
    const auto model = fit_hhi(parse_hhi_csv(csv::Table::read(c.hhi)));
    for (const auto& warning : model.warnings) report.note("hhi: " + warning);
    const auto classes = classify_by_year(model, c.quantile);
    std::map<int, std::vector<double>> by_year_all, by_year_comp, by_year_conc;
    for (const auto& r : rows) {
      if (!r.error.empty()) continue;
      for (const auto& [year, prob] : r.yearly) {
        by_year_all[year].push_back(prob);
        auto cls = classes.find({r.industry, year});
        if (cls == classes.end()) continue;
        if (cls->second == CompetitionClass::competitive) by_year_comp[year].push_back(prob);
        if (cls->second == CompetitionClass::concentrated) by_year_conc[year].push_back(prob);
      }
    }
    csv::Writer t6({"year", "prob", "prob_competitive", "prob_concentrated", "difference", "p_value", "n_competitive",
                    "n_concentrated"});
    std::vector<double> pool_all, pool_comp, pool_conc;
    auto emit = [&](const std::string& label, const std::vector<double>& a, const std::vector<double>& comp,
                    const std::vector<double>& conc) {
      const std::string ma = a.empty() ? "NA" : csv::fixed6(mean(a));
      if (comp.empty() || conc.empty()) {
        t6.row({label, ma, comp.empty() ? "NA" : csv::fixed6(mean(comp)), conc.empty() ? "NA" : csv::fixed6(mean(conc)),
                "NA", "NA", std::to_string(comp.size()), std::to_string(conc.size())});
        return;
      }
      const auto test = wilcoxon_one_sided(conc, comp);
      t6.row({label, ma, csv::fixed6(mean(comp)), csv::fixed6(mean(conc)), csv::fixed6(mean(comp) - mean(conc)),
              csv::fixed6(test.p_value), std::to_string(comp.size()), std::to_string(conc.size())});
    };
    for (const auto& [year, a] : by_year_all) {
      const auto& comp = by_year_comp[year];
      const auto& conc = by_year_conc[year];
      if (comp.empty() && conc.empty()) continue;  // years the HHI model does not cover
      emit(std::to_string(year), a, comp, conc);
      pool_all.insert(pool_all.end(), a.begin(), a.end());
      pool_comp.insert(pool_comp.end(), comp.begin(), comp.end());
      pool_conc.insert(pool_conc.end(), conc.begin(), conc.end());
    }
    emit("total", pool_all, pool_comp, pool_conc);
    detail::save(report, detail::out_path(c, "table6.csv"), t6);
  } catch (const std::exception& e) {
    report.fatal(e.what());
  }
  return report;
}

// ---------------------------------------------------------------------------
// characteristics

inline std::map<std::pair<std::string, Quarter>, int> load_ccx_counts(const std::string& path) {
  const auto table = csv::Table::read(path);
  const auto ci = table.column("industry");
  const auto cq = table.column("quarter");
  const auto cc = table.column("ccx");
  std::map<std::pair<std::string, Quarter>, int> out;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& r = table.row(i);
    out[{std::string(r[ci]), Quarter::parse(r[cq])}] = static_cast<int>(csv::parse_int(r[cc], "ccx count"));
  }
  return out;
}

inline Report cmd_characteristics(const RunConfig& c) {
  Report report("characteristics");
  try {
    validate(c);
    detail::require_file(c.accounting, "accounting");
    detail::require_file(c.ccx_counts_path(), "CCX count");
    IndustryPanelInputs in;
    in.firms = load_firm_csv(c.accounting);
    in.ccx_counts = load_ccx_counts(c.ccx_counts_path());
    in.first = c.sample_start.offset(-detail::kLagQuarters);
    in.last = c.sample_end;
    in.excluded = c.exclude;
    in.excluded.insert(c.financial_id);
    if (std::filesystem::is_regular_file(c.hhi)) {
      const auto model = fit_hhi(parse_hhi_csv(csv::Table::read(c.hhi)));
      for (const auto& warning : model.warnings) report.note("hhi: " + warning);
      in.competition = classify_by_year(model, c.quantile);
      csv::Writer w({"industry", "year", "fitted_hhi", "competition"});
      for (const auto& [key, value] : model.fitted) {
        auto cls = in.competition.find(key);
        w.row({key.first, std::to_string(key.second), csv::fixed6(value),
               std::string(to_string(cls == in.competition.end() ? CompetitionClass::middle : cls->second))});
      }
      detail::save(report, detail::out_path(c, "hhi_fit.csv"), w);
    } else {
      report.note("no HHI file at '" + c.hhi + "', every industry is classed middle");
    }
    const auto build = build_industry_panel(in);
    for (const auto& line : build.log) report.note(line);
    if (build.panel.size() == 0) throw DataError("no industry survived the panel construction");
    detail::write_text(c.industry_panel_path(), industry_panel_csv(build.panel));
    report.output(c.industry_panel_path());
  } catch (const std::exception& e) {
    report.fatal(e.what());
  }
  return report;
}

// ---------------------------------------------------------------------------
// regress

struct ModelSpec {
  std::string table;  // output file stem
  std::string name;   // column label, e.g. "model3"
  DesignSpec design;
};

inline const std::vector<std::string>& count_controls() {
  static const std::vector<std::string> v{"VOLP", "DEBT_COST", "EP", "SIZE"};
  return v;
}

/// Model grid of the count regressions.
inline std::vector<ModelSpec> count_models(const std::vector<std::string>& sets) {
  const std::vector<std::string> main{"ND_I", "VAL_I", "INV_I"};
  auto make = [](std::vector<std::string> vars, std::vector<std::string> split) {
    DesignSpec d;
    d.variables = std::move(vars);
    d.split = std::move(split);
    d.controls = count_controls();
    return d;
  };
  std::vector<ModelSpec> out;
  for (const auto& set : sets) {
    if (set == "table7") {
      out.push_back({"table7", "model1", make({}, {})});
      for (std::size_t k = 0; k < main.size(); ++k) out.push_back({"table7", "model" + std::to_string(k + 2), make({main[k]}, {})});
      out.push_back({"table7", "model5", make(main, {})});
    } else if (set == "table8") {
      for (std::size_t k = 0; k < main.size(); ++k) out.push_back({"table8", "model" + std::to_string(k + 1), make(main, {main[k]})});
    } else if (set == "table9") {
      for (auto cls : {CompetitionClass::competitive, CompetitionClass::concentrated}) {
        const std::string table = "table9_" + std::string(to_string(cls));
        std::vector<ModelSpec> grid{{table, "model1", make(main, {})}};
        for (std::size_t k = 0; k < main.size(); ++k) grid.push_back({table, "model" + std::to_string(k + 2), make(main, {main[k]})});
        for (auto& m : grid) m.design.subsample = cls;
        out.insert(out.end(), grid.begin(), grid.end());
      }
    }
  }
  return out;
}

namespace detail {

/// Standard deviation of a design column; regime columns use the rows of their regime.
inline double column_sd(const PanelDesign& d, Eigen::Index j, const CrisisWindow& crisis) {
  const auto& name = d.columns[static_cast<std::size_t>(j)];
  const bool is_crisis = name.ends_with("*crisis");
  const bool is_non = name.ends_with("*non-crisis");
  std::vector<double> v;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (is_crisis || is_non) {
      const bool prev = crisis.contains(Quarter::from_index(d.period[static_cast<std::size_t>(i)] - 1));
      if (prev != is_crisis) continue;
    }
    v.push_back(d.x(i, j));
  }
  return v.size() > 1 ? sample_sd(v) : kMissing;
}

inline std::string format_count(std::size_t n) { return std::to_string(n); }

}  // namespace detail

struct ModelOutcome {
  std::vector<std::vector<std::string>> rows;  // model,term,coef,t_stat,ei_pct
  std::vector<std::string> notes;
  std::string error;
};

inline ModelOutcome run_count_model(const IndustryQuarterPanel& panel, const ModelSpec& m, const CrisisWindow& crisis) {
  ModelOutcome out;
  try {
    const auto d = build_design(panel, m.design, crisis);
    for (const auto& note : d.dropped) out.notes.push_back(m.table + " " + m.name + ": " + note);
    const auto fit = poisson_gmm(d);
    if (!fit.converged) out.notes.push_back(m.table + " " + m.name + ": GMM did not converge");
    for (std::size_t j = 0; j < d.columns.size(); ++j) {
      const auto kind = d.kinds[j];
      if (kind == ColumnKind::industry_dummy || kind == ColumnKind::time_dummy) continue;
      const auto jj = static_cast<Eigen::Index>(j);
      std::string ei = "NA";
      if (kind != ColumnKind::intercept) ei = csv::fixed6(economic_impact(fit.coef[jj], detail::column_sd(d, jj, crisis)));
      out.rows.push_back({m.name, d.columns[j], csv::fixed6(fit.coef[jj]), csv::fixed6(fit.t[jj]), ei});
    }
    out.rows.push_back({m.name, "pseudo_r2", csv::fixed6(fit.pseudo_r2), "NA", "NA"});
    out.rows.push_back({m.name, "wald_p", csv::fixed6(fit.wald_p), "NA", "NA"});
    out.rows.push_back({m.name, "observations", detail::format_count(fit.observations), "NA", "NA"});
    out.rows.push_back({m.name, "groups", detail::format_count(fit.groups), "NA", "NA"});
    out.rows.push_back({m.name, "j_statistic", fit.j_statistic ? csv::fixed6(*fit.j_statistic) : "NA", "NA", "NA"});
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

inline IndustryQuarterPanel load_industry_panel(const RunConfig& c) {
  detail::require_file(c.industry_panel_path(), "industry panel");
  return parse_industry_panel_csv(csv::Table::read(c.industry_panel_path()));
}

inline Report cmd_regress(const RunConfig& c) {
  Report report("regress");
  try {
    validate(c);
    const auto first = c.sample_start.offset(-detail::kLagQuarters);
    const auto panel = load_industry_panel(c).filter([&](const IndustryQuarter& r) {
      return !(r.quarter < first) && !(c.sample_end < r.quarter) && !c.exclude.count(r.industry);
    });
    const auto models = count_models(c.models);
    const auto outcomes = parallel_map(models.size(), c.workers,
                                       [&](std::size_t i) { return run_count_model(panel, models[i], c.crisis()); });
    std::map<std::string, csv::Writer> tables;
    for (std::size_t i = 0; i < models.size(); ++i) {
      auto [it, fresh] = tables.try_emplace(models[i].table, std::vector<std::string>{"model", "term", "coef", "t_stat", "ei_pct"});
      for (const auto& note : outcomes[i].notes) report.note(note);
      if (!outcomes[i].error.empty()) {
        report.error(models[i].table + " " + models[i].name, outcomes[i].error);
        continue;
      }
      for (const auto& row : outcomes[i].rows) it->second.row(row);
    }
    for (const auto& [table, w] : tables) detail::save(report, detail::out_path(c, table + ".csv"), w);
  } catch (const std::exception& e) {
    report.fatal(e.what());
  }
  return report;
}

// ---------------------------------------------------------------------------
// dd

struct FirmDdRow {
  std::string firm;
  int year = 0;
  int month = 0;
  double equity = 0.0, equity_vol = 0.0, debt = 0.0, rate = 0.0;
  MertonSolution solution;
};

struct FirmDdOutcome {
  std::vector<FirmDdRow> rows;
  std::size_t skipped = 0;  // month ends without usable inputs
  std::string error;
};

/// Monthly DD from trailing daily equity volatility and the quarter's balance sheet.
inline FirmDdOutcome firm_monthly_dd(const std::string& firm, const FirmReturnSeries& s,
                                     const std::map<Quarter, const FirmQuarter*>& accounts, const RunConfig& c) {
  FirmDdOutcome out;
  try {
    const std::size_t n = s.dates.size();
    for (std::size_t t = 0; t < n; ++t) {
      const bool month_end = t + 1 == n || s.dates[t + 1].month() != s.dates[t].month() ||
                             s.dates[t + 1].year() != s.dates[t].year();
      if (!month_end) continue;
      const std::size_t window = std::min<std::size_t>(t + 1, static_cast<std::size_t>(c.dd_window));
      if (window < static_cast<std::size_t>(c.dd_min_obs)) continue;
      auto acc = accounts.find(Quarter::of(s.dates[t]));
      if (acc == accounts.end()) {
        ++out.skipped;
        continue;
      }
      const auto& f = *acc->second;
      FirmDdRow row;
      row.firm = firm;
      row.year = static_cast<int>(s.dates[t].year());
      row.month = static_cast<int>(static_cast<unsigned>(s.dates[t].month()));
      row.equity = f.me;
      row.equity_vol = sample_sd(std::span(s.returns).subspan(t + 1 - window, window)) * std::sqrt(252.0);
      row.debt = c.dd_debt == DebtDefinition::total ? f.debt_face : f.debt_face - 0.5 * f.ltd;
      row.rate = f.rf;
      if (!(row.equity > 0.0 && row.equity_vol > 0.0 && row.debt > 0.0 && std::isfinite(row.rate))) {
        ++out.skipped;
        continue;
      }
      row.solution = solve_merton({row.equity, row.equity_vol, row.debt, row.rate, 1.0}, c.dd_drift);
      if (!row.solution.converged) {
        ++out.skipped;
        continue;
      }
      out.rows.push_back(row);
    }
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

inline std::vector<ModelSpec> dd_models() {
  DesignSpec d;
  d.response = "DD";
  d.variables = {"DD_FIN"};
  d.controls = {"VOLP", "LEV", "EP", "SIZE"};
  d.instrument_lags.clear();
  d.time_dummies = false;  // DD_FIN is constant within a quarter
  d.drop_all_zero_groups = false;
  DesignSpec split = d;
  split.split = {"DD_FIN"};
  return {{"table10", "model1", d}, {"table10", "model2", split}};
}

inline Report cmd_dd(const RunConfig& c) {
  Report report("dd");
  try {
    validate(c);
    detail::require_file(c.accounting, "accounting");
    detail::require_file(c.firm_returns, "firm returns");
    const auto accounting = load_firm_csv(c.accounting);
    const auto returns = parse_firm_returns_csv(csv::Table::read(c.firm_returns));
    std::map<std::string, std::string> industry_of;
    std::map<std::string, std::map<Quarter, const FirmQuarter*>> accounts;
    for (const auto& f : accounting) {
      industry_of[f.firm] = f.industry;
      accounts[f.firm][f.quarter] = &f;
    }
    std::vector<std::string> firms;
    for (const auto& [firm, series] : returns) {
      if (!industry_of.count(firm)) {
        report.error(firm, "firm has returns but no accounting rows");
        continue;
      }
      if (c.exclude.count(industry_of[firm])) continue;
      firms.push_back(firm);
    }
    const auto outcomes = parallel_map(firms.size(), c.workers, [&](std::size_t i) {
      return firm_monthly_dd(firms[i], returns.at(firms[i]), accounts.at(firms[i]), c);
    });

    csv::Writer firm_out({"firm", "industry", "year", "month", "equity", "equity_vol", "debt", "rate", "asset_value",
                          "asset_vol", "dd"});
    std::vector<FirmMonthDd> monthly;
    for (std::size_t i = 0; i < firms.size(); ++i) {
      const auto& o = outcomes[i];
      if (!o.error.empty()) {
        report.error(firms[i], o.error);
        continue;
      }
      if (o.skipped) report.note(firms[i] + ": " + std::to_string(o.skipped) + " month ends without usable inputs");
      for (const auto& r : o.rows) {
        firm_out.row({r.firm, industry_of[r.firm], std::to_string(r.year), std::to_string(r.month), csv::fixed6(r.equity),
                      csv::fixed6(r.equity_vol), csv::fixed6(r.debt), csv::fixed6(r.rate),
                      csv::fixed6(r.solution.asset_value), csv::fixed6(r.solution.asset_vol),
                      csv::fixed6(r.solution.distance_to_default)});
        monthly.push_back({r.firm, r.year, r.month, r.solution.distance_to_default});
      }
    }
    detail::save(report, detail::out_path(c, "firm_dd.csv"), firm_out);
    const auto industry = industry_dd(monthly, industry_of);
    csv::Writer ind_out({"industry", "quarter", "dd"});
    for (const auto& [key, value] : industry) ind_out.row({key.first, key.second.str(), csv::fixed6(value)});
    detail::save(report, detail::out_path(c, "industry_dd.csv"), ind_out);

    // Regression sample: the estimation quarters, industries with DD in every quarter.
    auto panel = load_industry_panel(c).filter([&](const IndustryQuarter& r) {
      return !(r.quarter < c.sample_start) && !(c.sample_end < r.quarter) && !c.exclude.count(r.industry);
    });
    ExtraColumns extra;
    std::set<std::string> missing;
    for (const auto& r : panel.rows()) {
      auto own = industry.find({r.industry, r.quarter});
      if (own == industry.end()) {
        missing.insert(r.industry);
        continue;
      }
      auto fin = industry.find({c.financial_id, r.quarter});
      if (fin == industry.end()) throw DataError("financial sector has no DD in " + r.quarter.str());
      extra["DD"][{r.industry, r.quarter}] = own->second;
      extra["DD_FIN"][{r.industry, r.quarter}] = fin->second;
    }
    for (const auto& m : missing) report.note("dd regression: dropped industry " + m + " (DD missing in some quarter)");
    panel = panel.filter([&](const IndustryQuarter& r) { return !missing.count(r.industry); });

    csv::Writer t10({"model", "term", "coef", "t_stat"});
    for (const auto& m : dd_models()) {
      try {
        const auto d = build_design(panel, m.design, c.crisis(), extra);
        const auto fit = prais_winsten(d);
        for (std::size_t j = 0; j < d.columns.size(); ++j) {
          const auto kind = d.kinds[j];
          if (kind == ColumnKind::industry_dummy || kind == ColumnKind::time_dummy) continue;
          const auto jj = static_cast<Eigen::Index>(j);
          t10.row({m.name, d.columns[j], csv::fixed6(fit.coef[jj]), csv::fixed6(fit.t[jj])});
        }
        t10.row({m.name, "rho", csv::fixed6(fit.rho), "NA"});
        t10.row({m.name, "r2", csv::fixed6(fit.r2), "NA"});
        t10.row({m.name, "observations", detail::format_count(fit.observations), "NA"});
        t10.row({m.name, "groups", detail::format_count(fit.groups), "NA"});
      } catch (const Error& e) {
        report.error("table10 " + m.name, e.what());
      }
    }
    detail::save(report, detail::out_path(c, "table10.csv"), t10);
  } catch (const std::exception& e) {
    report.fatal(e.what());
  }
  return report;
}

// ---------------------------------------------------------------------------
// simulate

inline Report cmd_simulate(const RunConfig& c) {
  Report report("simulate");
  try {
    validate(c);
    ReturnsDgp rdgp;
    rdgp.seed = c.seed;
    rdgp.first = c.sim_start;
    rdgp.last = c.sim_end;
    rdgp.industries = c.sim_industries;
    rdgp.financial_id = c.financial_id;
    rdgp.crisis = c.crisis();
    const auto returns = sim_var_garch_spillover(rdgp);
    detail::write_text(c.returns, returns_csv(returns.panel));
    report.output(c.returns);

    AccountingDgp adgp;
    adgp.seed = c.seed;
    adgp.industries = returns.panel.sectors();
    adgp.firms_per_industry = c.sim_firms;
    adgp.first = c.sim_accounting_start;
    adgp.last = Quarter::of(c.sim_end);
    adgp.valuation_noise = c.sim_spread_noise;
    adgp.investment_noise = c.sim_spread_noise;
    const auto accounting = sim_accounting_panel(adgp);
    detail::write_text(c.accounting, firm_csv(accounting.rows));
    report.output(c.accounting);

    HhiDgp hdgp;
    hdgp.seed = c.seed;
    hdgp.industries = returns.panel.industries();
    hdgp.first_year = c.sample_start.year;
    hdgp.last_year = static_cast<int>(c.sim_end.year());
    const auto hhi = sim_hhi(hdgp);
    detail::write_text(c.hhi, hhi_csv(hhi.rows));
    report.output(c.hhi);

    std::vector<std::string> firms;
    std::map<std::string, std::string> industry_of;
    for (const auto& sector : returns.panel.sectors()) {
      for (int k = 1; k <= c.sim_return_firms; ++k) {
        firms.push_back(sector + "F" + std::to_string(k));
        industry_of[firms.back()] = sector;
      }
    }
    const auto firm_returns = sim_firm_returns(returns.panel, firms, industry_of, c.seed);
    detail::write_text(c.firm_returns, firm_returns_csv(returns.panel.calendar(), firm_returns));
    report.output(c.firm_returns);

    const json truth = {{"returns", returns.truth}, {"accounting", accounting.truth}, {"hhi", hhi.truth}};
    const auto truth_path = detail::out_path(c, "truth.json");
    detail::write_text(truth_path, truth.dump(2) + "\n");
    report.output(truth_path);
    const auto config_path = detail::out_path(c, "config.txt");
    detail::write_text(config_path, to_text(c));
    report.output(config_path);
  } catch (const std::exception& e) {
    report.fatal(e.what());
  }
  return report;
}

/// Writes the manifest next to the outputs. Failing to write it is itself fatal.
inline int finish(Report& report, const RunConfig& c) {
  try {
    detail::write_text(detail::out_path(c, report.manifest_name()), report.to_json().dump(2) + "\n");
  } catch (const std::exception&) {
    return 2;
  }
  return report.exit_code();
}

}  // namespace spillover
