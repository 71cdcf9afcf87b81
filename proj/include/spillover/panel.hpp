#pragma once

// Data model: daily sector return panels, firm-quarter accounting rows and
// the industry-quarter characteristics panel, with their CSV contracts.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "spillover/calendar.hpp"
#include "spillover/csv.hpp"
#include "spillover/error.hpp"

namespace spillover {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// Trading-date by sector matrix of daily returns.
///
/// Cells outside a sector's active range hold NaN; inside it every value is
/// finite. Exactly one sector is designated financial.
class ReturnsPanel {
 public:
  ReturnsPanel() = default;

  ReturnsPanel(TradingCalendar calendar, std::vector<std::string> sectors, std::vector<std::vector<double>> columns,
               std::string financial_id)
      : calendar_(std::move(calendar)),
        sectors_(std::move(sectors)),
        columns_(std::move(columns)),
        financial_id_(std::move(financial_id)) {
    if (columns_.size() != sectors_.size()) throw DataError("sector count does not match column count");
    for (std::size_t j = 1; j < sectors_.size(); ++j) {
      if (!(sectors_[j - 1] < sectors_[j])) throw DataError("sector ids must be unique and sorted");
    }
    ranges_.reserve(columns_.size());
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      const auto& col = columns_[j];
      if (col.size() != calendar_.size()) throw DataError("column length does not match calendar");
      std::size_t first = col.size();
      std::size_t last = 0;
      for (std::size_t t = 0; t < col.size(); ++t) {
        if (std::isnan(col[t])) continue;
        if (!std::isfinite(col[t])) throw DataError("non-finite return for sector " + sectors_[j]);
        first = std::min(first, t);
        last = t + 1;
      }
      if (first >= last) throw DataError("sector " + sectors_[j] + " has no observations");
      for (std::size_t t = first; t < last; ++t) {
        if (std::isnan(col[t]))
          throw DataError("missing observation inside active range of sector " + sectors_[j] + " at " +
                          format_date(calendar_.date(t)));
      }
      ranges_.emplace_back(first, last);
    }
    if (!index_of(financial_id_)) throw DataError("financial sector '" + financial_id_ + "' not present");
  }

  [[nodiscard]] const TradingCalendar& calendar() const { return calendar_; }
  [[nodiscard]] const std::vector<std::string>& sectors() const { return sectors_; }
  [[nodiscard]] const std::string& financial_id() const { return financial_id_; }
  [[nodiscard]] std::size_t num_dates() const { return calendar_.size(); }
  [[nodiscard]] std::size_t num_sectors() const { return sectors_.size(); }

  [[nodiscard]] std::optional<std::size_t> index_of(std::string_view sector) const {
    auto it = std::lower_bound(sectors_.begin(), sectors_.end(), sector);
    if (it == sectors_.end() || *it != sector) return std::nullopt;
    return static_cast<std::size_t>(it - sectors_.begin());
  }

  [[nodiscard]] std::span<const double> column(std::size_t j) const { return columns_[j]; }
  [[nodiscard]] std::span<const double> column(std::string_view sector) const { return columns_[require(sector)]; }
  [[nodiscard]] double value(std::size_t t, std::size_t j) const { return columns_[j][t]; }

  /// Half-open [first, last) active date range of a sector.
  [[nodiscard]] std::pair<std::size_t, std::size_t> active_range(std::size_t j) const { return ranges_[j]; }

  /// Non-financial sector ids, sorted.
  [[nodiscard]] std::vector<std::string> industries() const {
    std::vector<std::string> out;
    for (const auto& s : sectors_) {
      if (s != financial_id_) out.push_back(s);
    }
    return out;
  }

  [[nodiscard]] std::size_t require(std::string_view sector) const {
    auto idx = index_of(sector);
    if (!idx) throw DataError("unknown sector '" + std::string(sector) + "'");
    return *idx;
  }

  /// Same data with another sector designated financial (role swap).
  [[nodiscard]] ReturnsPanel with_financial(std::string id) const {
    return ReturnsPanel(calendar_, sectors_, columns_, std::move(id));
  }

  /// Panel restricted to the listed sectors (financial sector always kept).
  [[nodiscard]] ReturnsPanel without(const std::set<std::string>& excluded) const {
    std::vector<std::string> keep_ids;
    std::vector<std::vector<double>> keep_cols;
    for (std::size_t j = 0; j < sectors_.size(); ++j) {
      if (sectors_[j] != financial_id_ && excluded.count(sectors_[j])) continue;
      keep_ids.push_back(sectors_[j]);
      keep_cols.push_back(columns_[j]);
    }
    return ReturnsPanel(calendar_, std::move(keep_ids), std::move(keep_cols), financial_id_);
  }

  /// Dates in [first, last] only; sectors without data in the span are dropped.
  [[nodiscard]] ReturnsPanel between(const Date& first, const Date& last) const {
    const auto& d = calendar_.dates();
    const auto b = static_cast<std::size_t>(std::lower_bound(d.begin(), d.end(), first) - d.begin());
    const auto e = static_cast<std::size_t>(std::upper_bound(d.begin(), d.end(), last) - d.begin());
    if (b >= e) throw DataError("sample span contains no trading dates");
    std::vector<std::string> ids;
    std::vector<std::vector<double>> cols;
    for (std::size_t j = 0; j < sectors_.size(); ++j) {
      std::vector<double> c(columns_[j].begin() + static_cast<std::ptrdiff_t>(b),
                            columns_[j].begin() + static_cast<std::ptrdiff_t>(e));
      if (std::all_of(c.begin(), c.end(), [](double v) { return std::isnan(v); })) continue;
      ids.push_back(sectors_[j]);
      cols.push_back(std::move(c));
    }
    return ReturnsPanel(calendar_.slice(b, e), std::move(ids), std::move(cols), financial_id_);
  }

 private:
  TradingCalendar calendar_;
  std::vector<std::string> sectors_;
  std::vector<std::vector<double>> columns_;
  std::vector<std::pair<std::size_t, std::size_t>> ranges_;
  std::string financial_id_;
};

/// Two return series on their common active dates.
struct AlignedPair {
  TradingCalendar calendar;
  std::vector<double> financial;
  std::vector<double> industry;
};

inline AlignedPair aligned_pair(const ReturnsPanel& panel, std::string_view industry) {
  const auto fin = panel.require(panel.financial_id());
  const auto ind = panel.require(industry);
  const auto [f0, f1] = panel.active_range(fin);
  const auto [i0, i1] = panel.active_range(ind);
  const auto b = std::max(f0, i0);
  const auto e = std::min(f1, i1);
  if (b >= e) throw DataError("sector " + std::string(industry) + " does not overlap the financial sector");
  AlignedPair out;
  out.calendar = panel.calendar().slice(b, e);
  auto fc = panel.column(fin);
  auto ic = panel.column(ind);
  out.financial.assign(fc.begin() + static_cast<std::ptrdiff_t>(b), fc.begin() + static_cast<std::ptrdiff_t>(e));
  out.industry.assign(ic.begin() + static_cast<std::ptrdiff_t>(b), ic.begin() + static_cast<std::ptrdiff_t>(e));
  return out;
}

/// Reads the `date,sector,return` contract. The calendar is the union of all dates.
inline ReturnsPanel parse_returns_csv(const csv::Table& table, const std::string& financial_id) {
  table.require_header({"date", "sector", "return"});
  if (financial_id.empty()) throw DataError("missing financial sector id");
  std::set<Date> date_set;
  std::set<std::string> sector_set;
  for (std::size_t i = 0; i < table.size(); ++i) {
    date_set.insert(parse_date(table.row(i)[0]));
    sector_set.emplace(table.row(i)[1]);
  }
  std::vector<Date> dates(date_set.begin(), date_set.end());
  std::vector<std::string> sectors(sector_set.begin(), sector_set.end());
  if (!sector_set.count(financial_id)) throw DataError("missing financial sector id '" + financial_id + "'");
  std::map<Date, std::size_t> date_pos;
  for (std::size_t t = 0; t < dates.size(); ++t) date_pos.emplace(dates[t], t);
  std::unordered_map<std::string, std::size_t> sector_pos;
  for (std::size_t j = 0; j < sectors.size(); ++j) sector_pos.emplace(sectors[j], j);

  std::vector<std::vector<double>> columns(sectors.size(), std::vector<double>(dates.size(), kMissing));
  std::vector<std::vector<bool>> seen(sectors.size(), std::vector<bool>(dates.size(), false));
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& row = table.row(i);
    const auto t = date_pos.at(parse_date(row[0]));
    const auto j = sector_pos.at(std::string(row[1]));
    if (seen[j][t])
      throw DataError("duplicate observation for sector " + std::string(row[1]) + " on " + std::string(row[0]));
    seen[j][t] = true;
    const double v = csv::parse_double(row[2], "return at line " + std::to_string(table.line_number(i)));
    if (!std::isfinite(v)) throw DataError("non-finite return at line " + std::to_string(table.line_number(i)));
    columns[j][t] = v;
  }
  return ReturnsPanel(TradingCalendar(std::move(dates)), std::move(sectors), std::move(columns), financial_id);
}

inline ReturnsPanel load_returns_csv(const std::string& path, const std::string& financial_id) {
  return parse_returns_csv(csv::Table::read(path), financial_id);
}

/// Date-major, then sector order; values at full round-trip precision.
inline std::string returns_csv(const ReturnsPanel& panel) {
  csv::Writer w({"date", "sector", "return"});
  for (std::size_t t = 0; t < panel.num_dates(); ++t) {
    const std::string date = format_date(panel.calendar().date(t));
    for (std::size_t j = 0; j < panel.num_sectors(); ++j) {
      const double v = panel.value(t, j);
      if (std::isnan(v)) continue;
      w.row({date, panel.sectors()[j], csv::exact(v)});
    }
  }
  return w.str();
}

inline void write_returns_csv(const ReturnsPanel& panel, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write '" + path + "'");
  f << returns_csv(panel);
}

/// Firm-level daily data used for value weighting.
struct FirmDailyPanel {
  TradingCalendar calendar;
  std::vector<std::string> firms;
  std::vector<std::vector<double>> returns;  // per firm, NaN when inactive
  std::vector<std::vector<double>> caps;     // per firm end-of-day market cap
};

/// Value-weighted industry returns, weighting each firm by its previous trading
/// day's market cap. The first calendar date has no weights and is dropped.
inline ReturnsPanel value_weighted_returns(const FirmDailyPanel& firms,
                                           const std::unordered_map<std::string, std::string>& industry_map,
                                           const std::string& financial_id) {
  const std::size_t n_dates = firms.calendar.size();
  if (n_dates < 2) throw DataError("value weighting needs at least two dates");
  if (firms.returns.size() != firms.firms.size() || firms.caps.size() != firms.firms.size())
    throw DataError("firm panel shape mismatch");
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t f = 0; f < firms.firms.size(); ++f) {
    auto it = industry_map.find(firms.firms[f]);
    if (it == industry_map.end()) throw DataError("firm " + firms.firms[f] + " has no industry");
    members[it->second].push_back(f);
  }
  std::vector<std::string> ids;
  std::vector<std::vector<double>> cols;
  for (const auto& [industry, list] : members) {
    std::vector<double> col(n_dates - 1, kMissing);
    std::size_t first_active = n_dates;
    std::size_t last_active = 0;
    for (std::size_t t = 1; t < n_dates; ++t) {
      double num = 0.0;
      double den = 0.0;
      bool any = false;
      for (auto f : list) {
        const double r = firms.returns[f][t];
        const double w = firms.caps[f][t - 1];
        if (std::isnan(r) || std::isnan(w)) continue;
        if (w < 0.0) throw DataError("negative market cap for firm " + firms.firms[f]);
        any = true;
        num += w * r;
        den += w;
      }
      if (!any) continue;
      if (den <= 0.0)
        throw DataError("missing value: all caps zero for industry " + industry + " on " +
                        format_date(firms.calendar.date(t)));
      col[t - 1] = num / den;
      first_active = std::min(first_active, t);
      last_active = t;
    }
    if (first_active > last_active) continue;
    ids.push_back(industry);
    cols.push_back(std::move(col));
  }
  return ReturnsPanel(firms.calendar.slice(1, n_dates), std::move(ids), std::move(cols), financial_id);
}

/// Clamps tails to order statistics, preserving element order.
///
/// The lower bound is the (floor(lower_q n) + 1)-th smallest value and the upper
/// bound the ceil(upper_q n)-th smallest, so that the same number of points is
/// clamped in each tail for symmetric levels.
inline std::vector<double> winsorize(std::span<const double> values, double lower_q, double upper_q) {
  if (values.empty()) throw DataError("winsorize: empty input");
  if (!(lower_q >= 0.0 && lower_q < upper_q && upper_q <= 1.0)) throw DataError("winsorize: invalid quantile levels");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  auto lo_rank = static_cast<std::size_t>(std::floor(lower_q * n + 1e-9)) + 1;
  auto hi_rank = static_cast<std::size_t>(std::ceil(upper_q * n - 1e-9));
  lo_rank = std::clamp<std::size_t>(lo_rank, 1, sorted.size());
  hi_rank = std::clamp<std::size_t>(hi_rank, lo_rank, sorted.size());
  const double lo = sorted[lo_rank - 1];
  const double hi = sorted[hi_rank - 1];
  std::vector<double> out(values.begin(), values.end());
  for (auto& v : out) v = std::clamp(v, lo, hi);
  return out;
}

/// Winsorizes the finite entries only; NaN (missing) entries pass through.
inline std::vector<double> winsorize_finite(std::span<const double> values, double lower_q, double upper_q) {
  std::vector<double> finite;
  for (double v : values) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  std::vector<double> out(values.begin(), values.end());
  if (finite.empty()) return out;
  const auto clamped = winsorize(finite, lower_q, upper_q);
  std::size_t k = 0;
  for (auto& v : out) {
    if (std::isfinite(v)) v = clamped[k++];
  }
  return out;
}

/// One firm in one quarter, straight from the accounting CSV. Missing fields are NaN.
struct FirmQuarter {
  std::string firm;
  std::string industry;
  Quarter quarter;
  double me = kMissing;        // market equity
  double be = kMissing;        // book equity
  double at = kMissing;        // total assets
  double ltd = kMissing;       // long-term debt
  double ltd_iss = kMissing;   // long-term debt issuance
  double ltd_red = kMissing;   // long-term debt reduction
  double capx = kMissing;      // capital expenditures
  double ppe = kMissing;       // property, plant and equipment
  double earn = kMissing;      // earnings
  double div_flag = kMissing;  // 1 when dividends were paid
  double age = kMissing;       // years since listing
  double shares = kMissing;    // common shares outstanding
  double rf = kMissing;        // annualized risk-free rate
  double debt_face = kMissing; // short + long-term debt face value
};

inline const std::vector<std::string>& firm_csv_header() {
  static const std::vector<std::string> header{"firm", "industry", "quarter", "me",   "be",     "at",
                                               "ltd",  "ltd_iss",  "ltd_red", "capx", "ppe",    "earn",
                                               "div_flag", "age",  "shares",  "rf",   "debt_face"};
  return header;
}

inline std::vector<FirmQuarter> parse_firm_csv(const csv::Table& table) {
  table.require_header(firm_csv_header());
  std::vector<FirmQuarter> rows;
  rows.reserve(table.size());
  std::set<std::pair<std::string, Quarter>> seen;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& r = table.row(i);
    const std::string where = " at line " + std::to_string(table.line_number(i));
    FirmQuarter fq;
    fq.firm = std::string(r[0]);
    fq.industry = std::string(r[1]);
    fq.quarter = Quarter::parse(r[2]);
    double* fields[] = {&fq.me,  &fq.be,   &fq.at,       &fq.ltd, &fq.ltd_iss, &fq.ltd_red, &fq.capx,
                        &fq.ppe, &fq.earn, &fq.div_flag, &fq.age, &fq.shares,  &fq.rf,      &fq.debt_face};
    for (std::size_t k = 0; k < std::size(fields); ++k)
      *fields[k] = csv::parse_optional_double(r[3 + k], firm_csv_header()[3 + k] + where);
    if (!std::isnan(fq.at) && fq.at <= 0.0) throw DataError("total assets must be positive" + where);
    if (!std::isnan(fq.ppe) && fq.ppe < 0.0) throw DataError("PPE must be non-negative" + where);
    if (!std::isnan(fq.age) && fq.age < 0.0) throw DataError("age must be non-negative" + where);
    if (!seen.emplace(fq.firm, fq.quarter).second)
      throw DataError("duplicate observation for firm " + fq.firm + " in " + fq.quarter.str());
    rows.push_back(std::move(fq));
  }
  return rows;
}

inline std::vector<FirmQuarter> load_firm_csv(const std::string& path) { return parse_firm_csv(csv::Table::read(path)); }

inline std::string firm_csv(const std::vector<FirmQuarter>& rows) {
  csv::Writer w(firm_csv_header());
  for (const auto& fq : rows) {
    w.row({fq.firm, fq.industry, fq.quarter.str(), csv::exact(fq.me), csv::exact(fq.be), csv::exact(fq.at),
           csv::exact(fq.ltd), csv::exact(fq.ltd_iss), csv::exact(fq.ltd_red), csv::exact(fq.capx), csv::exact(fq.ppe),
           csv::exact(fq.earn), csv::exact(fq.div_flag), csv::exact(fq.age), csv::exact(fq.shares), csv::exact(fq.rf),
           csv::exact(fq.debt_face)});
  }
  return w.str();
}

enum class CompetitionClass { competitive, concentrated, middle };

inline std::string_view to_string(CompetitionClass c) {
  switch (c) {
    case CompetitionClass::competitive: return "competitive";
    case CompetitionClass::concentrated: return "concentrated";
    case CompetitionClass::middle: return "middle";
  }
  return "middle";
}

inline CompetitionClass parse_competition(std::string_view s) {
  if (s == "competitive") return CompetitionClass::competitive;
  if (s == "concentrated") return CompetitionClass::concentrated;
  if (s == "middle") return CompetitionClass::middle;
  throw DataError("unknown competition class '" + std::string(s) + "'");
}

/// Quarterly industry observation feeding the count regressions.
struct IndustryQuarter {
  std::string industry;
  Quarter quarter;
  double ccx = 0.0;  // integer count stored as double for the design matrix
  double nd_i = kMissing;
  double val_i = kMissing;
  double inv_i = kMissing;
  double volp = kMissing;
  double lev = kMissing;
  double debt_cost = kMissing;
  double ep = kMissing;
  double ni = kMissing;
  double size = kMissing;
  CompetitionClass competition = CompetitionClass::middle;
};

/// Names accepted in model specifications.
inline const std::vector<std::string>& industry_variable_names() {
  static const std::vector<std::string> names{"CCX", "ND_I", "VAL_I", "INV_I", "VOLP",
                                              "LEV", "DEBT_COST", "EP", "NI", "SIZE"};
  return names;
}

inline double industry_variable(const IndustryQuarter& row, std::string_view name) {
  if (name == "CCX") return row.ccx;
  if (name == "ND_I") return row.nd_i;
  if (name == "VAL_I") return row.val_i;
  if (name == "INV_I") return row.inv_i;
  if (name == "VOLP") return row.volp;
  if (name == "LEV") return row.lev;
  if (name == "DEBT_COST") return row.debt_cost;
  if (name == "EP") return row.ep;
  if (name == "NI") return row.ni;
  if (name == "SIZE") return row.size;
  throw DataError("unknown industry variable '" + std::string(name) + "'");
}

/// Industry-quarter rows sorted by (industry, quarter).
class IndustryQuarterPanel {
 public:
  IndustryQuarterPanel() = default;

  explicit IndustryQuarterPanel(std::vector<IndustryQuarter> rows) : rows_(std::move(rows)) {
    std::sort(rows_.begin(), rows_.end(), [](const auto& a, const auto& b) {
      return std::tie(a.industry, a.quarter) < std::tie(b.industry, b.quarter);
    });
    for (std::size_t i = 1; i < rows_.size(); ++i) {
      if (rows_[i - 1].industry == rows_[i].industry && rows_[i - 1].quarter == rows_[i].quarter)
        throw DataError("duplicate industry-quarter " + rows_[i].industry + " " + rows_[i].quarter.str());
    }
    for (const auto& r : rows_) {
      if (r.ccx < 0.0 || r.ccx != std::floor(r.ccx)) throw DataError("CCX count must be a non-negative integer");
    }
  }

  [[nodiscard]] const std::vector<IndustryQuarter>& rows() const { return rows_; }
  [[nodiscard]] std::size_t size() const { return rows_.size(); }

  [[nodiscard]] std::vector<std::string> industries() const {
    std::vector<std::string> out;
    for (const auto& r : rows_) {
      if (out.empty() || out.back() != r.industry) out.push_back(r.industry);
    }
    return out;
  }

  [[nodiscard]] std::vector<Quarter> quarters() const {
    std::set<Quarter> qs;
    for (const auto& r : rows_) qs.insert(r.quarter);
    return {qs.begin(), qs.end()};
  }

  /// Every industry observed in every quarter, with consecutive quarters.
  [[nodiscard]] bool balanced() const {
    const auto inds = industries();
    const auto qs = quarters();
    if (rows_.size() != inds.size() * qs.size()) return false;
    for (std::size_t i = 1; i < qs.size(); ++i) {
      if (qs[i].index() != qs[i - 1].index() + 1) return false;
    }
    return true;
  }

  [[nodiscard]] IndustryQuarterPanel filter(const std::function<bool(const IndustryQuarter&)>& keep) const {
    std::vector<IndustryQuarter> out;
    for (const auto& r : rows_) {
      if (keep(r)) out.push_back(r);
    }
    return IndustryQuarterPanel(std::move(out));
  }

 private:
  std::vector<IndustryQuarter> rows_;
};

inline const std::vector<std::string>& industry_panel_header() {
  static const std::vector<std::string> header{"industry", "quarter", "ccx",       "nd_i", "val_i", "inv_i", "volp",
                                               "lev",      "debt_cost", "ep",      "ni",   "size",  "competition"};
  return header;
}

inline std::string industry_panel_csv(const IndustryQuarterPanel& panel) {
  csv::Writer w(industry_panel_header());
  for (const auto& r : panel.rows()) {
    w.row({r.industry, r.quarter.str(), csv::fixed6(r.ccx), csv::exact(r.nd_i), csv::exact(r.val_i),
           csv::exact(r.inv_i), csv::exact(r.volp), csv::exact(r.lev), csv::exact(r.debt_cost), csv::exact(r.ep),
           csv::exact(r.ni), csv::exact(r.size), std::string(to_string(r.competition))});
  }
  return w.str();
}

inline IndustryQuarterPanel parse_industry_panel_csv(const csv::Table& table) {
  table.require_header(industry_panel_header());
  std::vector<IndustryQuarter> rows;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& r = table.row(i);
    IndustryQuarter q;
    q.industry = std::string(r[0]);
    q.quarter = Quarter::parse(r[1]);
    q.ccx = static_cast<double>(csv::parse_int(r[2], "ccx"));
    double* fields[] = {&q.nd_i, &q.val_i, &q.inv_i, &q.volp, &q.lev, &q.debt_cost, &q.ep, &q.ni, &q.size};
    for (std::size_t k = 0; k < std::size(fields); ++k)
      *fields[k] = csv::parse_optional_double(r[3 + k], industry_panel_header()[3 + k]);
    q.competition = parse_competition(r[12]);
    rows.push_back(std::move(q));
  }
  return IndustryQuarterPanel(std::move(rows));
}

}  // namespace spillover
