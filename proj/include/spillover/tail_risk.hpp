#pragma once

// Lower-tail exceedances, conditional coexceedance (CCX) indicators and their
// likelihood summaries, plus the one-sided Wilcoxon rank-sum test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "spillover/calendar.hpp"
#include "spillover/error.hpp"
#include "spillover/numeric.hpp"

namespace spillover {

using Indicator = std::vector<std::uint8_t>;

struct ExceedanceSeries {
  TradingCalendar calendar;
  Indicator flags;
  double alpha = 0.05;
  double threshold = 0.0;
};

/// Flags returns at or below the ceil(alpha T)-th smallest return of the full sample.
inline ExceedanceSeries exceedance(const TradingCalendar& calendar, std::span<const double> returns, double alpha) {
  if (calendar.size() != returns.size()) throw DataError("exceedance: calendar and returns differ in length");
  if (!(alpha > 0.0 && alpha < 0.5)) throw DataError("exceedance: alpha must lie in (0, 0.5)");
  const std::size_t n = returns.size();
  if (static_cast<double>(n) * alpha < 1.0 - 1e-9) throw DataError("exceedance: series shorter than 1/alpha");
  std::vector<double> sorted(returns.begin(), returns.end());
  const auto k = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n) - 1e-9));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  const double threshold = sorted[k - 1];
  const auto [lo, hi] = std::minmax_element(returns.begin(), returns.end());
  if (*lo == *hi) throw DataError("exceedance: degenerate distribution");
  ExceedanceSeries out;
  out.calendar = calendar;
  out.alpha = alpha;
  out.threshold = threshold;
  out.flags.resize(n);
  for (std::size_t t = 0; t < n; ++t) out.flags[t] = returns[t] <= threshold ? 1 : 0;
  return out;
}

enum class CcxVariant { contemporaneous, fin_leads, industry_leads, windowed };

inline std::string to_string(CcxVariant v, int window = 3) {
  switch (v) {
    case CcxVariant::contemporaneous: return "contemporaneous";
    case CcxVariant::fin_leads: return "fin_leads";
    case CcxVariant::industry_leads: return "industry_leads";
    case CcxVariant::windowed: return "windowed(" + std::to_string(window) + ")";
  }
  return "contemporaneous";
}

struct CcxSeries {
  TradingCalendar calendar;
  Indicator flags;
  CcxVariant variant = CcxVariant::contemporaneous;
  int window = 1;

  [[nodiscard]] std::size_t count() const {
    return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), std::uint8_t{1}));
  }
  [[nodiscard]] double mean() const {
    return flags.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(flags.size());
  }
};

namespace detail {
inline void require_same_calendar(const ExceedanceSeries& a, const ExceedanceSeries& b) {
  if (!(a.calendar == b.calendar)) throw DataError("calendar mismatch between exceedance series");
}
}  // namespace detail

/// Both the industry and the financial sector exceed on the same date.
inline CcxSeries ccx(const ExceedanceSeries& industry, const ExceedanceSeries& financial) {
  detail::require_same_calendar(industry, financial);
  CcxSeries out;
  out.calendar = industry.calendar;
  out.flags.resize(industry.flags.size());
  for (std::size_t t = 0; t < out.flags.size(); ++t) out.flags[t] = industry.flags[t] & financial.flags[t];
  return out;
}

enum class LeadDirection { fin_leads, industry_leads };

/// One-day lead-lag coexceedance; the first date is dropped.
/// fin_leads: I_i[t] * I_fin[t-1]; industry_leads: I_i[t-1] * I_fin[t].
inline CcxSeries ccx_lagged(const ExceedanceSeries& industry, const ExceedanceSeries& financial,
                            LeadDirection direction) {
  detail::require_same_calendar(industry, financial);
  const std::size_t n = industry.flags.size();
  if (n < 2) throw DataError("lagged CCX needs at least two dates");
  CcxSeries out;
  out.calendar = industry.calendar.slice(1, n);
  out.variant = direction == LeadDirection::fin_leads ? CcxVariant::fin_leads : CcxVariant::industry_leads;
  out.flags.resize(n - 1);
  for (std::size_t t = 1; t < n; ++t) {
    out.flags[t - 1] = direction == LeadDirection::fin_leads ? (industry.flags[t] & financial.flags[t - 1])
                                                             : (industry.flags[t - 1] & financial.flags[t]);
  }
  return out;
}

/// Industry exceedance on t with a financial exceedance anywhere in the trailing
/// window [t - w + 1, t]. Early dates use the part of the window inside the sample.
inline CcxSeries ccx_windowed(const ExceedanceSeries& industry, const ExceedanceSeries& financial, int w = 3) {
  detail::require_same_calendar(industry, financial);
  if (w < 1) throw DataError("CCX window must be at least 1");
  const std::size_t n = industry.flags.size();
  if (static_cast<std::size_t>(w) > n) throw DataError("CCX window longer than the sample");
  CcxSeries out;
  out.calendar = industry.calendar;
  out.variant = w == 1 ? CcxVariant::contemporaneous : CcxVariant::windowed;
  out.window = w;
  out.flags.resize(n);
  std::size_t last_fin = n;  // most recent financial exceedance index, n = none yet
  for (std::size_t t = 0; t < n; ++t) {
    if (financial.flags[t]) last_fin = t;
    const bool recent = last_fin != n && t - last_fin < static_cast<std::size_t>(w);
    out.flags[t] = (industry.flags[t] && recent) ? 1 : 0;
  }
  return out;
}

struct WilcoxonResult {
  double statistic = 0.0;  // rank sum of the y sample (midranks)
  double p_value = 1.0;    // P(W >= observed) under the null
  bool exact = false;
};

namespace detail {

/// Number of size-m subsets of {1..n} for every rank sum (index = sum).
inline std::vector<double> rank_sum_counts(int n, int m) {
  const int max_sum = m * (2 * n - m + 1) / 2;
  // counts[j][s]: subsets of size j with sum s over the ranks seen so far.
  std::vector<std::vector<double>> counts(static_cast<std::size_t>(m + 1),
                                          std::vector<double>(static_cast<std::size_t>(max_sum + 1), 0.0));
  counts[0][0] = 1.0;
  for (int rank = 1; rank <= n; ++rank) {
    for (int j = std::min(rank, m); j >= 1; --j) {
      auto& row = counts[static_cast<std::size_t>(j)];
      const auto& prev = counts[static_cast<std::size_t>(j - 1)];
      for (int s = max_sum; s >= rank; --s) row[static_cast<std::size_t>(s)] += prev[static_cast<std::size_t>(s - rank)];
    }
  }
  return counts[static_cast<std::size_t>(m)];
}

}  // namespace detail

/// One-sided rank-sum test of "y is shifted to the right of x".
///
/// Exact null distribution when the pooled sample has at most 20 values and no
/// ties; otherwise the normal approximation with tie and continuity correction.
inline WilcoxonResult wilcoxon_one_sided(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw DataError("Wilcoxon test needs two nonempty samples");
  const std::size_t nx = x.size();
  const std::size_t ny = y.size();
  const std::size_t n = nx + ny;
  std::vector<std::pair<double, bool>> pooled;  // (value, from y)
  pooled.reserve(n);
  for (double v : x) pooled.emplace_back(v, false);
  for (double v : y) pooled.emplace_back(v, true);
  std::sort(pooled.begin(), pooled.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  double w = 0.0;
  double tie_term = 0.0;  // sum of t^3 - t over tie groups
  bool ties = false;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    const double group = static_cast<double>(j - i);
    if (j - i > 1) {
      ties = true;
      tie_term += group * group * group - group;
    }
    for (std::size_t k = i; k < j; ++k) {
      if (pooled[k].second) w += midrank;
    }
    i = j;
  }

  WilcoxonResult out;
  out.statistic = w;
  if (n <= 20 && !ties) {
    const auto counts = detail::rank_sum_counts(static_cast<int>(n), static_cast<int>(ny));
    double total = 0.0;
    double upper = 0.0;
    const auto w_int = static_cast<std::size_t>(std::llround(w));
    for (std::size_t s = 0; s < counts.size(); ++s) {
      total += counts[s];
      if (s >= w_int) upper += counts[s];
    }
    out.p_value = upper / total;
    out.exact = true;
    return out;
  }
  const double dn = static_cast<double>(n);
  const double expected = static_cast<double>(ny) * (dn + 1.0) / 2.0;
  const double variance =
      static_cast<double>(nx) * static_cast<double>(ny) / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (!(variance > 0.0)) {
    out.p_value = 1.0;  // every value tied: the observed sum is the only possible one
    return out;
  }
  const double z = (w - expected - 0.5) / std::sqrt(variance);
  out.p_value = normal_sf(z);
  return out;
}

struct LikelihoodReport {
  double prob = 0.0;
  double prob_crisis = 0.0;
  double prob_non_crisis = 0.0;
  std::size_t n1 = 0, n0 = 0;
  std::size_t n1_crisis = 0, n0_crisis = 0;
  std::size_t n1_non_crisis = 0, n0_non_crisis = 0;
  WilcoxonResult wilcoxon;  // crisis-day indicators vs non-crisis-day indicators
};

/// Full-sample and per-regime CCX frequencies.
inline LikelihoodReport likelihoods(const CcxSeries& series, const std::vector<bool>& crisis) {
  if (crisis.size() != series.flags.size()) throw DataError("likelihoods: crisis mask not aligned with CCX series");
  LikelihoodReport rep;
  std::vector<double> in_crisis;
  std::vector<double> outside;
  for (std::size_t t = 0; t < crisis.size(); ++t) {
    const bool hit = series.flags[t] != 0;
    if (crisis[t]) {
      (hit ? rep.n1_crisis : rep.n0_crisis)++;
      in_crisis.push_back(hit ? 1.0 : 0.0);
    } else {
      (hit ? rep.n1_non_crisis : rep.n0_non_crisis)++;
      outside.push_back(hit ? 1.0 : 0.0);
    }
  }
  if (in_crisis.empty() || outside.empty()) throw DataError("likelihoods: a regime is empty, its probability is undefined");
  rep.n1 = rep.n1_crisis + rep.n1_non_crisis;
  rep.n0 = rep.n0_crisis + rep.n0_non_crisis;
  rep.prob = static_cast<double>(rep.n1) / static_cast<double>(rep.n1 + rep.n0);
  rep.prob_crisis = static_cast<double>(rep.n1_crisis) / static_cast<double>(in_crisis.size());
  rep.prob_non_crisis = static_cast<double>(rep.n1_non_crisis) / static_cast<double>(outside.size());
  rep.wilcoxon = wilcoxon_one_sided(outside, in_crisis);
  return rep;
}

inline LikelihoodReport likelihoods(const CcxSeries& series, const CrisisWindow& window) {
  return likelihoods(series, crisis_indicator(series.calendar, window));
}

/// Daily indicator totals per calendar quarter, in quarter order, including zero quarters.
inline std::vector<std::pair<Quarter, int>> quarterly_counts(const CcxSeries& series) {
  std::vector<std::pair<Quarter, int>> out;
  for (std::size_t t = 0; t < series.flags.size(); ++t) {
    const Quarter q = series.calendar.quarter(t);
    if (out.empty() || out.back().first != q) out.emplace_back(q, 0);
    out.back().second += series.flags[t];
  }
  return out;
}

/// CCX frequency per calendar year.
inline std::map<int, double> yearly_probabilities(const CcxSeries& series) {
  std::map<int, std::pair<std::size_t, std::size_t>> tally;  // hits, days
  for (std::size_t t = 0; t < series.flags.size(); ++t) {
    auto& [hits, days] = tally[series.calendar.year(t)];
    hits += series.flags[t];
    ++days;
  }
  std::map<int, double> out;
  for (const auto& [year, hd] : tally) out[year] = static_cast<double>(hd.first) / static_cast<double>(hd.second);
  return out;
}

}  // namespace spillover
