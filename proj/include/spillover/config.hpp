#pragma once

// Run configuration: `key = value` lines, `#` comments. Every option has a
// default here; the command line overrides the file.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spillover/calendar.hpp"
#include "spillover/csv.hpp"
#include "spillover/error.hpp"
#include "spillover/garch.hpp"

namespace spillover {

enum class DebtDefinition { total, kmv };

struct RunConfig {
  // Inputs and outputs.
  std::string returns = "returns.csv";
  std::string accounting = "accounting.csv";
  std::string hhi = "hhi.csv";
  std::string firm_returns = "firm_returns.csv";
  std::string output = "out";
  std::string industry_panel;  // default: <output>/industry_panel.csv
  std::string ccx_counts;      // default: <output>/ccx_quarterly.csv

  std::string financial_id = "FIN";
  double alpha = 0.05;
  Date crisis_start = CrisisWindow{}.start;
  Date crisis_end = CrisisWindow{}.end;
  double quantile = 0.25;
  Quarter sample_start{2001, 1};
  Quarter sample_end{2011, 4};
  std::set<std::string> exclude;
  std::vector<std::string> models{"table7", "table8", "table9"};
  std::uint64_t seed = 1;
  int workers = 1;

  Distribution distribution = Distribution::normal;
  int var_pmax = 10;
  int ccx_window = 3;
  bool reverse = false;

  DebtDefinition dd_debt = DebtDefinition::total;
  std::optional<double> dd_drift;  // defaults to the risk-free rate
  int dd_window = 252;             // trailing trading days for equity volatility
  int dd_min_obs = 60;

  // Simulator shape.
  int sim_industries = 73;
  int sim_firms = 8;
  int sim_return_firms = 3;
  Date sim_start = make_date(2000, 7, 1);  // two quarters of lag history before 2001Q1
  Date sim_end = make_date(2011, 12, 31);
  Quarter sim_accounting_start{1996, 1};
  double sim_spread_noise = 0.1;

  [[nodiscard]] CrisisWindow crisis() const { return CrisisWindow(crisis_start, crisis_end); }
  [[nodiscard]] std::string industry_panel_path() const {
    return industry_panel.empty() ? (std::filesystem::path(output) / "industry_panel.csv").string() : industry_panel;
  }
  [[nodiscard]] std::string ccx_counts_path() const {
    return ccx_counts.empty() ? (std::filesystem::path(output) / "ccx_quarterly.csv").string() : ccx_counts;
  }
  [[nodiscard]] Date sample_first_date() const {
    return make_date(sample_start.year, static_cast<unsigned>(3 * sample_start.q - 2), 1);
  }
  [[nodiscard]] Date sample_last_date() const {
    const std::chrono::year_month_day_last last{std::chrono::year{sample_end.year} /
                                                std::chrono::month{static_cast<unsigned>(3 * sample_end.q)} /
                                                std::chrono::last};
    return Date{last};
  }
};

namespace detail {

inline std::string trim_copy(std::string_view s) { return std::string(csv::trim(s)); }

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  for (auto part : csv::split(s)) {
    auto t = trim_copy(part);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

inline bool parse_bool(std::string_view v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw DataError("config: " + key + " must be true or false");
}

}  // namespace detail

/// Checks the supported option sets; file existence is checked by each command.
inline void validate(const RunConfig& c) {
  if (c.alpha != 0.05 && c.alpha != 0.025 && c.alpha != 0.01)
    throw DataError("config: alpha must be one of 0.05, 0.025, 0.01");
  if (c.quantile != 0.25 && c.quantile != 0.10) throw DataError("config: quantile must be 0.25 or 0.10");
  (void)c.crisis();
  if (c.sample_end < c.sample_start) throw DataError("config: sample_end precedes sample_start");
  if (c.workers < 1) throw DataError("config: workers must be at least 1");
  if (c.var_pmax < 1) throw DataError("config: var_pmax must be at least 1");
  if (c.ccx_window < 1) throw DataError("config: ccx_window must be at least 1");
  if (c.dd_min_obs < 2 || c.dd_window < c.dd_min_obs) throw DataError("config: need 2 <= dd_min_obs <= dd_window");
  if (c.sim_industries < 1 || c.sim_firms < 3 || c.sim_return_firms < 1 || c.sim_return_firms > c.sim_firms)
    throw DataError("config: invalid simulator shape");
  for (const auto& m : c.models) {
    if (m != "table7" && m != "table8" && m != "table9") throw DataError("config: unknown model set '" + m + "'");
  }
}

/// Applies one `key = value` setting.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  const std::string what = "config key " + key;
  auto as_int = [&] { return static_cast<int>(csv::parse_int(value, what)); };
  if (key == "returns") c.returns = value;
  else if (key == "accounting") c.accounting = value;
  else if (key == "hhi") c.hhi = value;
  else if (key == "firm_returns") c.firm_returns = value;
  else if (key == "output") c.output = value;
  else if (key == "industry_panel") c.industry_panel = value;
  else if (key == "ccx_counts") c.ccx_counts = value;
  else if (key == "financial_id") c.financial_id = value;
  else if (key == "alpha") c.alpha = csv::parse_double(value, what);
  else if (key == "crisis_start") c.crisis_start = parse_date(value);
  else if (key == "crisis_end") c.crisis_end = parse_date(value);
  else if (key == "quantile") c.quantile = csv::parse_double(value, what);
  else if (key == "sample_start") c.sample_start = Quarter::parse(value);
  else if (key == "sample_end") c.sample_end = Quarter::parse(value);
  else if (key == "exclude") {
    const auto list = detail::split_list(value);
    c.exclude = std::set<std::string>(list.begin(), list.end());
  } else if (key == "models") c.models = detail::split_list(value);
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(csv::parse_int(value, what));
  else if (key == "workers") c.workers = as_int();
  else if (key == "distribution") c.distribution = parse_distribution(value);
  else if (key == "var_pmax") c.var_pmax = as_int();
  else if (key == "ccx_window") c.ccx_window = as_int();
  else if (key == "reverse") c.reverse = detail::parse_bool(value, key);
  else if (key == "dd_debt") {
    if (value == "total") c.dd_debt = DebtDefinition::total;
    else if (value == "kmv") c.dd_debt = DebtDefinition::kmv;
    else throw DataError("config: dd_debt must be total or kmv");
  } else if (key == "dd_drift") {
    if (value.empty() || value == "rate") c.dd_drift.reset();
    else c.dd_drift = csv::parse_double(value, what);
  } else if (key == "dd_window") c.dd_window = as_int();
  else if (key == "dd_min_obs") c.dd_min_obs = as_int();
  else if (key == "sim_industries") c.sim_industries = as_int();
  else if (key == "sim_firms") c.sim_firms = as_int();
  else if (key == "sim_return_firms") c.sim_return_firms = as_int();
  else if (key == "sim_start") c.sim_start = parse_date(value);
  else if (key == "sim_end") c.sim_end = parse_date(value);
  else if (key == "sim_accounting_start") c.sim_accounting_start = Quarter::parse(value);
  else if (key == "sim_spread_noise") c.sim_spread_noise = csv::parse_double(value, what);
  else throw DataError("config: unknown key '" + key + "'");
}

inline RunConfig parse_config(std::string_view text, const std::string& origin = "<config>", RunConfig c = {}) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = csv::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw DataError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      apply_setting(c, detail::trim_copy(line.substr(0, eq)), detail::trim_copy(line.substr(eq + 1)));
    } catch (const DataError& e) {
      throw DataError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return c;
}

/// Reads a config file. Relative paths inside it resolve against its directory.
inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig c = parse_config(buf.str(), path);
  const auto base = std::filesystem::absolute(path).parent_path();
  for (std::string* p : {&c.returns, &c.accounting, &c.hhi, &c.firm_returns, &c.output, &c.industry_panel,
                         &c.ccx_counts}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  }
  return c;
}

/// Canonical text form; parse_config(to_text(c)) reproduces c.
inline std::string to_text(const RunConfig& c) {
  std::ostringstream o;
  auto join = [](const auto& items) {
    std::string s;
    for (const auto& i : items) s += (s.empty() ? "" : ",") + i;
    return s;
  };
  o << "returns = " << c.returns << "\n"
    << "accounting = " << c.accounting << "\n"
    << "hhi = " << c.hhi << "\n"
    << "firm_returns = " << c.firm_returns << "\n"
    << "output = " << c.output << "\n";
  if (!c.industry_panel.empty()) o << "industry_panel = " << c.industry_panel << "\n";
  if (!c.ccx_counts.empty()) o << "ccx_counts = " << c.ccx_counts << "\n";
  o << "financial_id = " << c.financial_id << "\n"
    << "alpha = " << csv::exact(c.alpha) << "\n"
    << "crisis_start = " << format_date(c.crisis_start) << "\n"
    << "crisis_end = " << format_date(c.crisis_end) << "\n"
    << "quantile = " << csv::exact(c.quantile) << "\n"
    << "sample_start = " << c.sample_start.str() << "\n"
    << "sample_end = " << c.sample_end.str() << "\n"
    << "exclude = " << join(c.exclude) << "\n"
    << "models = " << join(c.models) << "\n"
    << "seed = " << c.seed << "\n"
    << "workers = " << c.workers << "\n"
    << "distribution = " << to_string(c.distribution) << "\n"
    << "var_pmax = " << c.var_pmax << "\n"
    << "ccx_window = " << c.ccx_window << "\n"
    << "reverse = " << (c.reverse ? "true" : "false") << "\n"
    << "dd_debt = " << (c.dd_debt == DebtDefinition::total ? "total" : "kmv") << "\n"
    << "dd_drift = " << (c.dd_drift ? csv::exact(*c.dd_drift) : "rate") << "\n"
    << "dd_window = " << c.dd_window << "\n"
    << "dd_min_obs = " << c.dd_min_obs << "\n"
    << "sim_industries = " << c.sim_industries << "\n"
    << "sim_firms = " << c.sim_firms << "\n"
    << "sim_return_firms = " << c.sim_return_firms << "\n"
    << "sim_start = " << format_date(c.sim_start) << "\n"
    << "sim_end = " << format_date(c.sim_end) << "\n"
    << "sim_accounting_start = " << c.sim_accounting_start.str() << "\n"
    << "sim_spread_noise = " << csv::exact(c.sim_spread_noise) << "\n";
  return o.str();
}

}  // namespace spillover
