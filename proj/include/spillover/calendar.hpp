#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "spillover/error.hpp"

namespace spillover {

using Date = std::chrono::year_month_day;

inline Date make_date(int y, unsigned m, unsigned d) {
  return Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
}

/// Parses a strict ISO-8601 calendar date (YYYY-MM-DD).
inline Date parse_date(std::string_view text) {
  auto fail = [&]() -> Date { throw DataError("invalid date '" + std::string(text) + "'"); };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return fail();
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  auto parse = [&](std::string_view part, auto& out) {
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    return ec == std::errc{} && ptr == part.data() + part.size();
  };
  if (!parse(text.substr(0, 4), y) || !parse(text.substr(5, 2), m) || !parse(text.substr(8, 2), d)) return fail();
  const Date date = make_date(y, m, d);
  if (!date.ok()) return fail();
  return date;
}

inline std::string format_date(const Date& date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

/// Calendar quarter, e.g. 2007Q3.
struct Quarter {
  int year = 0;
  int q = 1;  // 1..4

  auto operator<=>(const Quarter&) const = default;

  /// Quarters since year 0; differences give the number of quarters between two labels.
  [[nodiscard]] int index() const { return year * 4 + (q - 1); }
  static Quarter from_index(int idx) { return Quarter{idx / 4, idx % 4 + 1}; }
  [[nodiscard]] Quarter offset(int quarters) const { return from_index(index() + quarters); }

  static Quarter of(const Date& date) {
    const auto month = static_cast<unsigned>(date.month());
    return Quarter{static_cast<int>(date.year()), static_cast<int>((month - 1) / 3 + 1)};
  }

  [[nodiscard]] std::string str() const { return std::to_string(year) + "Q" + std::to_string(q); }

  static Quarter parse(std::string_view text) {
    if (text.size() != 6 || text[4] != 'Q' || text[5] < '1' || text[5] > '4')
      throw DataError("invalid quarter '" + std::string(text) + "'");
    int y = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + 4, y);
    if (ec != std::errc{} || ptr != text.data() + 4) throw DataError("invalid quarter '" + std::string(text) + "'");
    return Quarter{y, text[5] - '0'};
  }
};

/// Ordered list of trading dates with their quarter labels.
class TradingCalendar {
 public:
  TradingCalendar() = default;

  explicit TradingCalendar(std::vector<Date> dates) : dates_(std::move(dates)) {
    for (std::size_t i = 1; i < dates_.size(); ++i) {
      if (!(dates_[i - 1] < dates_[i])) throw DataError("trading dates must be strictly increasing");
    }
    quarters_.reserve(dates_.size());
    for (const auto& d : dates_) quarters_.push_back(Quarter::of(d));
  }

  /// Monday-to-Friday dates in [first, last]; the simulators use this as their calendar.
  static TradingCalendar weekdays(Date first, Date last) {
    std::vector<Date> out;
    for (std::chrono::sys_days day{first}; day <= std::chrono::sys_days{last}; day += std::chrono::days{1}) {
      const std::chrono::weekday wd{day};
      if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) out.emplace_back(day);
    }
    return TradingCalendar(std::move(out));
  }

  [[nodiscard]] std::size_t size() const { return dates_.size(); }
  [[nodiscard]] bool empty() const { return dates_.empty(); }
  [[nodiscard]] const std::vector<Date>& dates() const { return dates_; }
  [[nodiscard]] const Date& date(std::size_t i) const { return dates_[i]; }
  [[nodiscard]] const Quarter& quarter(std::size_t i) const { return quarters_[i]; }
  [[nodiscard]] int year(std::size_t i) const { return static_cast<int>(dates_[i].year()); }

  /// Distinct quarters in calendar order.
  [[nodiscard]] std::vector<Quarter> quarter_list() const {
    std::vector<Quarter> out;
    for (const auto& q : quarters_) {
      if (out.empty() || out.back() != q) out.push_back(q);
    }
    return out;
  }

  /// Sub-calendar of positions [begin, end).
  [[nodiscard]] TradingCalendar slice(std::size_t begin, std::size_t end) const {
    return TradingCalendar(std::vector<Date>(dates_.begin() + static_cast<std::ptrdiff_t>(begin),
                                             dates_.begin() + static_cast<std::ptrdiff_t>(end)));
  }

  bool operator==(const TradingCalendar& other) const { return dates_ == other.dates_; }

 private:
  std::vector<Date> dates_;
  std::vector<Quarter> quarters_;
};

/// Inclusive date range marking the crisis regime.
struct CrisisWindow {
  Date start = make_date(2007, 7, 1);
  Date end = make_date(2009, 3, 31);

  CrisisWindow() = default;
  CrisisWindow(Date s, Date e) : start(s), end(e) {
    if (end < start) throw DataError("crisis window start must not be after its end");
  }

  [[nodiscard]] bool contains(const Date& d) const { return !(d < start) && !(end < d); }

  /// A quarter is a crisis quarter when any of its days falls inside the window.
  [[nodiscard]] bool contains(const Quarter& q) const {
    const Date first = make_date(q.year, static_cast<unsigned>(3 * (q.q - 1) + 1), 1);
    const Date last_month = make_date(q.year, static_cast<unsigned>(3 * q.q), 1);
    const Date last = std::chrono::year_month_day_last{last_month.year(), std::chrono::month_day_last{last_month.month()}};
    return !(last < start) && !(end < first);
  }
};

/// Per-date crisis flag; the window must overlap the calendar span.
inline std::vector<bool> crisis_indicator(const TradingCalendar& calendar, const CrisisWindow& window) {
  if (calendar.empty()) return {};
  if (window.end < calendar.dates().front() || calendar.dates().back() < window.start)
    throw DataError("crisis window lies outside the calendar span");
  std::vector<bool> out(calendar.size());
  for (std::size_t i = 0; i < calendar.size(); ++i) out[i] = window.contains(calendar.date(i));
  return out;
}

}  // namespace spillover
