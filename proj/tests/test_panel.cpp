#include <catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <unordered_map>

#include "spillover/calendar.hpp"
#include "spillover/csv.hpp"
#include "spillover/panel.hpp"
#include "spillover/random.hpp"

using namespace spillover;

TEST_CASE("dates and quarters") {
  const Date d = parse_date("2008-01-15");
  CHECK(format_date(d) == "2008-01-15");
  CHECK(Quarter::of(d).str() == "2008Q1");
  CHECK(Quarter::parse("2007Q3").offset(2).str() == "2008Q1");
  CHECK_THROWS_AS(parse_date("2008-1-15"), DataError);
  CHECK_THROWS_AS(parse_date("2008-02-30"), DataError);
  CHECK_THROWS_AS(TradingCalendar({make_date(2001, 1, 3), make_date(2001, 1, 2)}), DataError);
}

TEST_CASE("crisis indicator boundaries") {
  const auto cal = TradingCalendar::weekdays(make_date(2006, 1, 2), make_date(2010, 12, 31));
  const CrisisWindow window;
  const auto flags = crisis_indicator(cal, window);
  for (std::size_t t = 0; t < cal.size(); ++t) {
    if (cal.date(t) == make_date(2008, 1, 15)) CHECK(flags[t]);
    if (cal.date(t) == make_date(2006, 5, 1)) CHECK_FALSE(flags[t]);
    if (cal.date(t) == make_date(2007, 7, 2)) CHECK(flags[t]);
    if (cal.date(t) == make_date(2007, 6, 29)) CHECK_FALSE(flags[t]);
    if (cal.date(t) == make_date(2009, 3, 31)) CHECK(flags[t]);
    if (cal.date(t) == make_date(2009, 4, 1)) CHECK_FALSE(flags[t]);
  }
  CHECK(window.contains(Quarter{2007, 3}));
  CHECK(window.contains(Quarter{2009, 1}));
  CHECK_FALSE(window.contains(Quarter{2007, 2}));
  CHECK_FALSE(window.contains(Quarter{2009, 2}));
  const auto early = TradingCalendar::weekdays(make_date(2001, 1, 1), make_date(2002, 1, 1));
  CHECK_THROWS_AS(crisis_indicator(early, window), DataError);
}

TEST_CASE("returns CSV parsing") {
  const std::string text = "date,sector,return\n2001-01-02,FIN,0.01\n2001-01-02,A,-0.02\n2001-01-02,B,0.5\n";
  const auto panel = parse_returns_csv(csv::Table::parse(text), "FIN");
  CHECK(panel.num_dates() == 1);
  CHECK(panel.num_sectors() == 3);
  CHECK(panel.sectors() == std::vector<std::string>{"A", "B", "FIN"});
  CHECK(panel.value(0, panel.require("A")) == -0.02);
  CHECK(panel.industries() == std::vector<std::string>{"A", "B"});

  const std::string dup = text + "2001-01-02,A,0.03\n";
  CHECK_THROWS_WITH(parse_returns_csv(csv::Table::parse(dup), "FIN"), Catch::Matchers::ContainsSubstring("duplicate observation"));
  const std::string bad = "date,sector,return\n2001-01-02,FIN,abc\n";
  CHECK_THROWS_AS(parse_returns_csv(csv::Table::parse(bad), "FIN"), DataError);
  CHECK_THROWS_AS(parse_returns_csv(csv::Table::parse(text), "BANKS"), DataError);
  const std::string gap =
      "date,sector,return\n2001-01-02,FIN,0.01\n2001-01-03,FIN,0.01\n2001-01-04,FIN,0.01\n"
      "2001-01-02,A,0.01\n2001-01-04,A,0.01\n";
  CHECK_THROWS_WITH(parse_returns_csv(csv::Table::parse(gap), "FIN"),
                    Catch::Matchers::ContainsSubstring("missing observation inside active range"));
}

TEST_CASE("returns CSV round-trips bit-identically at full scale") {
  const auto cal = TradingCalendar::weekdays(make_date(2001, 1, 1), make_date(2011, 8, 10));
  REQUIRE(cal.size() >= 2767);
  const auto trimmed = cal.slice(0, 2767);
  Rng rng(5);
  std::vector<std::string> sectors;
  std::vector<std::vector<double>> cols;
  for (int j = 0; j < 74; ++j) {
    char id[8];
    std::snprintf(id, sizeof id, "S%02d", j);
    sectors.emplace_back(id);
    std::vector<double> col(trimmed.size());
    for (auto& v : col) v = 0.02 * rng.normal();
    cols.push_back(std::move(col));
  }
  const ReturnsPanel panel(trimmed, sectors, cols, "S00");
  const std::string first = returns_csv(panel);
  const auto back = parse_returns_csv(csv::Table::parse(first), "S00");
  CHECK(returns_csv(back) == first);
  for (std::size_t j = 0; j < 74; ++j) {
    for (std::size_t t = 0; t < trimmed.size(); ++t) REQUIRE(back.value(t, j) == panel.value(t, j));
  }
}

TEST_CASE("value-weighted returns") {
  const auto cal = TradingCalendar::weekdays(make_date(2001, 1, 1), make_date(2001, 1, 2));
  FirmDailyPanel firms{cal, {"f1", "f2", "solo", "bank"}, {}, {}};
  firms.returns = {{0.0, 0.02}, {0.0, -0.01}, {0.0, 0.031}, {0.0, 0.001}};
  firms.caps = {{1.0, 5.0}, {3.0, 1.0}, {7.0, 7.0}, {2.0, 2.0}};
  const std::unordered_map<std::string, std::string> map{{"f1", "IND"}, {"f2", "IND"}, {"solo", "ONE"}, {"bank", "FIN"}};
  const auto panel = value_weighted_returns(firms, map, "FIN");
  REQUIRE(panel.num_dates() == 1);
  CHECK(panel.value(0, panel.require("IND")) == Catch::Approx(-0.0025).margin(1e-15));
  CHECK(panel.value(0, panel.require("ONE")) == 0.031);

  firms.caps[0][0] = 0.0;
  firms.caps[1][0] = 0.0;
  CHECK_THROWS_WITH(value_weighted_returns(firms, map, "FIN"), Catch::Matchers::ContainsSubstring("all caps zero"));
}

TEST_CASE("value-weighted returns equal a brute-force dot product") {
  const auto cal = TradingCalendar::weekdays(make_date(2003, 1, 1), make_date(2003, 6, 30));
  Rng rng(99);
  FirmDailyPanel firms{cal, {}, {}, {}};
  std::unordered_map<std::string, std::string> map;
  for (int f = 0; f < 6; ++f) {
    const std::string id = "f" + std::to_string(f);
    firms.firms.push_back(id);
    map[id] = f < 5 ? "IND" : "FIN";
    std::vector<double> r(cal.size()), c(cal.size());
    for (std::size_t t = 0; t < cal.size(); ++t) {
      r[t] = 0.03 * rng.normal();
      c[t] = rng.uniform(1.0, 100.0);
    }
    firms.returns.push_back(r);
    firms.caps.push_back(c);
  }
  const auto panel = value_weighted_returns(firms, map, "FIN");
  const auto col = panel.column("IND");
  for (std::size_t t = 1; t < cal.size(); ++t) {
    double num = 0.0, den = 0.0, lo = 1e9, hi = -1e9;
    for (int f = 0; f < 5; ++f) {
      num += firms.caps[f][t - 1] * firms.returns[f][t];
      den += firms.caps[f][t - 1];
      lo = std::min(lo, firms.returns[f][t]);
      hi = std::max(hi, firms.returns[f][t]);
    }
    REQUIRE(col[t - 1] == Catch::Approx(num / den).margin(1e-15));
    REQUIRE((col[t - 1] >= lo - 1e-15 && col[t - 1] <= hi + 1e-15));
  }
}

TEST_CASE("winsorize") {
  const std::vector<double> x{1, 2, 3, 4, 100};
  CHECK(winsorize(x, 0.0, 0.8) == std::vector<double>{1, 2, 3, 4, 4});
  CHECK(winsorize(x, 0.0, 1.0) == x);
  CHECK_THROWS_AS(winsorize(std::vector<double>{}, 0.0, 1.0), DataError);

  Rng rng(1);
  std::vector<double> u(1000);
  for (auto& v : u) v = rng.uniform();
  const auto w = winsorize(u, 0.01, 0.99);
  std::vector<double> sorted = u;
  std::sort(sorted.begin(), sorted.end());
  int clamped_low = 0, clamped_high = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < sorted[10]) {
      ++clamped_low;
      CHECK(w[i] == sorted[10]);
    } else if (u[i] > sorted[989]) {
      ++clamped_high;
      CHECK(w[i] == sorted[989]);
    } else {
      CHECK(w[i] == u[i]);
    }
  }
  CHECK(clamped_low == 10);
  CHECK(clamped_high == 10);
  CHECK(winsorize(w, 0.01, 0.99) == w);
}

TEST_CASE("firm and industry CSV contracts") {
  FirmQuarter fq;
  fq.firm = "F1";
  fq.industry = "IND";
  fq.quarter = Quarter{2004, 2};
  fq.me = 10.5;
  fq.at = 20.0;
  fq.ppe = 3.0;
  fq.age = 4.0;
  const auto text = firm_csv({fq});
  const auto back = parse_firm_csv(csv::Table::parse(text));
  REQUIRE(back.size() == 1);
  CHECK(back[0].me == 10.5);
  CHECK(std::isnan(back[0].be));
  CHECK(firm_csv(back) == text);

  fq.at = -1.0;
  CHECK_THROWS_AS(parse_firm_csv(csv::Table::parse(firm_csv({fq}))), DataError);

  IndustryQuarter row;
  row.industry = "IND";
  row.quarter = Quarter{2005, 1};
  row.ccx = 3;
  row.lev = 0.25;
  row.competition = CompetitionClass::concentrated;
  const IndustryQuarterPanel panel({row});
  const auto csv_text = industry_panel_csv(panel);
  const auto parsed = parse_industry_panel_csv(csv::Table::parse(csv_text));
  CHECK(industry_panel_csv(parsed) == csv_text);
  CHECK(parsed.rows()[0].competition == CompetitionClass::concentrated);
  row.ccx = 1.5;
  CHECK_THROWS_AS(IndustryQuarterPanel({row}), DataError);
}

TEST_CASE("fixed six-significant-digit formatting") {
  CHECK(csv::fixed6(0.0261) == "0.0261");
  CHECK(csv::fixed6(2.0 / 3.0) == "0.666667");
  CHECK(csv::fixed6(-0.0) == "0");
  CHECK(csv::fixed6(std::nan("")) == "NA");
  CHECK(csv::parse_double(csv::exact(0.1 + 0.2), "x") == 0.1 + 0.2);
}
