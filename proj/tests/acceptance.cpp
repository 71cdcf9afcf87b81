// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "spillover/spillover.hpp"

using namespace spillover;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream o;
  o.precision(digits);
  o << v;
  return o.str();
}

double pct(int k, int n) { return 100.0 * k / n; }

// ---------------------------------------------------------------------------
// 1. Economic impact of published coefficients against published EI.

Outcome economic_impact_check() {
  // Standard deviations of the full-sample descriptive statistics.
  const std::map<std::string, double> sd{{"ND_I", 0.028}, {"VAL_I", 0.253},    {"INV_I", 0.952}, {"VOLP", 0.046},
                                         {"DEBT_COST", 0.116}, {"EP", 0.279}, {"SIZE", 0.984}};
  struct Pair {
    const char* var;
    double coef;
    double ei;
  };
  // Unsplit coefficient / EI pairs of the baseline and crisis-split count regressions.
  const std::vector<Pair> pairs{
      // baseline model 1
      {"VOLP", 1.984, 9.97}, {"DEBT_COST", 0.706, 8.62}, {"EP", -0.155, -4.30}, {"SIZE", -0.114, -10.71},
      // model 2
      {"ND_I", 2.842, 8.52}, {"VOLP", 1.858, 9.31}, {"DEBT_COST", 0.669, 8.15}, {"EP", -0.155, -4.30},
      {"SIZE", -0.12, -11.24},
      // model 3
      {"VAL_I", -0.623, -14.67}, {"VOLP", 2.09, 10.53}, {"DEBT_COST", 0.588, 7.13}, {"EP", -0.119, -3.32},
      {"SIZE", -0.095, -9.01},
      // model 4
      {"INV_I", -0.071, -6.59}, {"VOLP", 1.97, 9.89}, {"DEBT_COST", 0.706, 8.62}, {"EP", -0.156, -4.32},
      {"SIZE", -0.114, -10.71},
      // model 5
      {"ND_I", 2.567, 7.67}, {"VAL_I", -0.618, -14.56}, {"INV_I", -0.056, -5.23}, {"VOLP", 1.934, 9.70},
      {"DEBT_COST", 0.56, 6.78}, {"EP", -0.121, -3.37}, {"SIZE", -0.103, -9.73},
      // crisis split, net debt split
      {"VAL_I", -0.614, -14.48}, {"INV_I", -0.056, -5.23}, {"VOLP", 1.922, 9.64}, {"DEBT_COST", 0.561, 6.79},
      {"EP", -0.12, -3.34}, {"SIZE", -0.102, -9.64},
      // valuation split
      {"ND_I", 2.54, 7.58}, {"INV_I", -0.055, -5.14}, {"VOLP", 1.905, 9.55}, {"DEBT_COST", 0.569, 6.89},
      {"EP", -0.118, -3.29}, {"SIZE", -0.103, -9.73},
      // investment split
      {"ND_I", 2.571, 7.68}, {"VAL_I", -0.62, -14.61}, {"VOLP", 1.94, 9.74}, {"DEBT_COST", 0.558, 6.75},
      {"EP", -0.121, -3.37}, {"SIZE", -0.103, -9.73}};
  int ok = 0;
  double worst = 0.0;
  for (const auto& p : pairs) {
    const double dev = std::abs(economic_impact(p.coef, sd.at(p.var)) - p.ei);
    worst = std::max(worst, dev);
    ok += dev <= 0.5;
  }
  const int n = static_cast<int>(pairs.size());
  return {ok == n, std::to_string(ok) + "/" + std::to_string(n) + " pairs within 0.5 pp, max deviation " + fmt(worst, 3) +
                       " pp"};
}

// ---------------------------------------------------------------------------
// 2. Competition class counts.

Outcome classification_counts() {
  std::vector<std::pair<std::string, double>> fitted;
  Rng rng(2, 0);
  for (int i = 0; i < 73; ++i) fitted.emplace_back(sector_id(i), rng.uniform(0.01, 0.5));
  auto count = [](const std::map<std::string, CompetitionClass>& m, CompetitionClass c) {
    return static_cast<int>(std::count_if(m.begin(), m.end(), [c](const auto& kv) { return kv.second == c; }));
  };
  const auto q25 = classify(fitted, 0.25);
  const auto q10 = classify(fitted, 0.10);
  const int a = count(q25, CompetitionClass::competitive), b = count(q25, CompetitionClass::concentrated);
  const int c = count(q10, CompetitionClass::competitive), d = count(q10, CompetitionClass::concentrated);
  return {a == 18 && b == 18 && c == 7 && d == 7, "q=0.25: " + std::to_string(a) + "/" + std::to_string(b) +
                                                       ", q=0.10: " + std::to_string(c) + "/" + std::to_string(d)};
}

// ---------------------------------------------------------------------------
// 3. GARCH(1,1) recovery.

Outcome garch_recovery() {
  const GarchParams truth{0.1, 0.05, 0.90, std::nullopt};
  const int seeds = 100;
  std::vector<double> err_w, err_a, err_b;
  int covered = 0, total = 0;
  for (int s = 1; s <= seeds; ++s) {
    Rng rng(static_cast<std::uint64_t>(s), stream::garch);
    const auto sample = simulate_garch(truth, 50000, rng);
    const auto fit = fit_garch11(sample.returns);
    const double est[] = {fit.params.omega, fit.params.alpha, fit.params.beta};
    const double se[] = {fit.se_omega, fit.se_alpha, fit.se_beta};
    const double tru[] = {truth.omega, truth.alpha, truth.beta};
    err_w.push_back(std::abs(est[0] - tru[0]));
    err_a.push_back(std::abs(est[1] - tru[1]));
    err_b.push_back(std::abs(est[2] - tru[2]));
    for (int k = 0; k < 3; ++k) {
      covered += std::abs(est[k] - tru[k]) <= 2.0 * se[k];
      ++total;
    }
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
  };
  const double mw = median(err_w), ma = median(err_a), mb = median(err_b);
  const double cov = pct(covered, total);
  const bool pass = mw < 0.02 && ma < 0.02 && mb < 0.02 && cov >= 88.0 && cov <= 98.0;
  return {pass, "median |error| omega " + fmt(mw, 3) + ", alpha " + fmt(ma, 3) + ", beta " + fmt(mb, 3) +
                    "; 2-SE coverage " + fmt(cov, 3) + "% of " + std::to_string(total)};
}

// ---------------------------------------------------------------------------
// 4. Spillover size and power.

struct SpilloverDraw {
  double t_gamma1 = 0.0;
  bool covers = false;  // |gamma1_hat - gamma1| <= 2 SE
};

SpilloverDraw spillover_draw(std::uint64_t seed, double gamma1, std::size_t n) {
  const GarchParams fin{0.05, 0.08, 0.87, std::nullopt};
  Rng rng_fin(seed, stream::id(stream::garch, 1));
  const auto f = simulate_garch(fin, n, rng_fin);
  std::vector<bool> crisis(n, false);
  for (std::size_t t = n * 6 / 10; t < n * 8 / 10; ++t) crisis[t] = true;
  Rng rng_ind(seed, stream::id(stream::garch, 2));
  std::vector<double> z(n);
  for (auto& v : z) v = rng_ind.normal();
  const SpilloverParams p{0.05, 0.05, 0.85, gamma1, 0.0, std::nullopt};
  const auto ind = simulate_spillover_industry(p, f.shocks, crisis, z);
  const auto fin_fit = fit_garch11(f.returns);
  const auto fit = fit_spillover(ind.returns, fin_fit.standardized_residuals, crisis);
  if (!fit.gamma1_identified) return {};
  return {fit.t_gamma1, std::abs(fit.params.gamma1 - gamma1) <= 2.0 * fit.se_gamma1};
}

Outcome spillover_size_power() {
  const int seeds = 200;
  const std::size_t n = 5000;
  // Spillover share of the average variance is gamma1 / (omega + gamma1).
  // Power is judged at a 30% share; the 20% floor is reported alongside.
  auto gamma_for = [](double share) { return 0.05 * share / (1.0 - share); };
  int size_hits = 0, power_hits = 0, floor_hits = 0, covered = 0;
  for (int s = 1; s <= seeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    size_hits += std::abs(spillover_draw(seed, 0.0, n).t_gamma1) > 1.96;
    const auto d = spillover_draw(1000 + seed, gamma_for(0.30), n);
    power_hits += d.t_gamma1 > 1.96;
    covered += d.covers;
    floor_hits += spillover_draw(1000 + seed, gamma_for(0.20), n).t_gamma1 > 1.96;
  }
  const double size = pct(size_hits, seeds), power = pct(power_hits, seeds), cov = pct(covered, seeds);
  return {size >= 3.0 && size <= 8.0 && power >= 90.0 && cov >= 90.0,
          "size " + fmt(size, 3) + "% over " + std::to_string(seeds) + " seeds; 30% share: power " + fmt(power, 3) +
              "%, 2-SE coverage " + fmt(cov, 3) + "%; 20% share: power " + fmt(pct(floor_hits, seeds), 3) + "%"};
}

// ---------------------------------------------------------------------------
// 5. CCX under independence and under a boosted crisis.

Outcome ccx_checks() {
  TailDependenceSpec indep;
  indep.seed = 5;
  indep.days = 1000000;
  const auto s = sim_tail_dependence(indep);
  const auto cal = s.panel.calendar();
  const auto c = ccx(exceedance(cal, s.panel.column("I00"), 0.05), exceedance(cal, s.panel.column("FIN"), 0.05));
  const double p0 = 0.0025;
  const double se = std::sqrt(p0 * (1 - p0) / static_cast<double>(indep.days));
  const double z = (c.mean() - p0) / se;

  TailDependenceSpec boosted;
  boosted.seed = 6;
  boosted.industries = 73;
  boosted.lambda = 0.1;
  boosted.lambda_crisis = 0.4;
  const auto b = sim_tail_dependence(boosted);
  std::vector<double> in_crisis, outside;
  for (const auto& id : b.panel.industries()) {
    const auto pair = aligned_pair(b.panel, id);
    const auto rep = likelihoods(ccx(exceedance(pair.calendar, pair.industry, 0.05),
                                     exceedance(pair.calendar, pair.financial, 0.05)),
                                 b.crisis);
    in_crisis.push_back(rep.prob_crisis);
    outside.push_back(rep.prob_non_crisis);
  }
  const auto test = wilcoxon_one_sided(outside, in_crisis);
  const bool higher = mean(in_crisis) > mean(outside);
  return {std::abs(z) <= 3.0 && higher && test.p_value < 0.01,
          "independence: " + fmt(c.mean(), 5) + " vs 0.0025 (" + fmt(z, 3) + " SE); crisis " + fmt(mean(in_crisis), 4) +
              " > non-crisis " + fmt(mean(outside), 4) + ", Wilcoxon p " + fmt(test.p_value, 3)};
}

// ---------------------------------------------------------------------------
// 6. Exact Wilcoxon against enumeration.

Outcome wilcoxon_exactness() {
  Rng rng(6, 0);
  double worst = 0.0;
  int cases = 0;
  bool all_exact = true;
  for (int nx = 1; nx <= 11; ++nx) {
    for (int ny = 1; nx + ny <= 12; ++ny) {
      const int n = nx + ny;
      std::vector<double> values(static_cast<std::size_t>(n));
      std::iota(values.begin(), values.end(), 1.0);
      for (int k = n - 1; k > 0; --k)
        std::swap(values[static_cast<std::size_t>(k)], values[static_cast<std::size_t>(rng.uniform() * (k + 1))]);
      for (auto& v : values) v = v * 0.37 + rng.uniform(0.0, 0.1);  // distinct, not integer
      const std::vector<double> x(values.begin(), values.begin() + nx), y(values.begin() + nx, values.end());
      // Ranks of the pooled sample; no ties.
      std::vector<double> sorted = values;
      std::sort(sorted.begin(), sorted.end());
      auto rank = [&](double v) { return static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin()) + 1; };
      int observed = 0;
      for (double v : y) observed += rank(v);
      // Every ny-subset of {1..n}.
      long long hits = 0, subsets = 0;
      for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (__builtin_popcount(mask) != ny) continue;
        int sum = 0;
        for (int k = 0; k < n; ++k) {
          if (mask & (1u << k)) sum += k + 1;
        }
        ++subsets;
        hits += sum >= observed;
      }
      const double oracle = static_cast<double>(hits) / static_cast<double>(subsets);
      const auto res = wilcoxon_one_sided(x, y);
      all_exact = all_exact && res.exact;
      worst = std::max(worst, std::abs(res.p_value - oracle));
      ++cases;
    }
  }
  const double small = wilcoxon_one_sided(std::vector<double>{1, 2}, std::vector<double>{3, 4}).p_value;
  const bool pass = all_exact && worst <= 1e-12 && std::abs(small - 1.0 / 6.0) <= 1e-12;
  return {pass, std::to_string(cases) + " size pairs, max |p - enumeration| " + fmt(worst, 3) + "; {1,2} vs {3,4}: " +
                    fmt(small, 10)};
}

// ---------------------------------------------------------------------------
// 7. Merton round trip.

Outcome merton_round_trip() {
  Rng rng(7, 0);
  double worst_v = 0.0, worst_s = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double v = rng.uniform(10.0, 1000.0);
    const double sv = rng.uniform(0.05, 0.8);
    const double d = v * rng.uniform(0.1, 0.95);
    const double r = rng.uniform(0.0, 0.08);
    const double t = rng.uniform(0.25, 5.0);
    const auto fwd = merton_forward(v, sv, d, r, t);
    const auto sol = solve_merton({fwd.equity, fwd.equity_vol, d, r, t});
    worst_v = std::max(worst_v, std::abs(sol.asset_value / v - 1.0));
    worst_s = std::max(worst_s, std::abs(sol.asset_vol / sv - 1.0));
  }
  return {worst_v < 1e-6 && worst_s < 1e-6,
          "100 points, max relative error V " + fmt(worst_v, 3) + ", sigma_V " + fmt(worst_s, 3)};
}

// ---------------------------------------------------------------------------
// 8. Poisson GMM recovery.

Eigen::VectorXd irls_poisson(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::VectorXd eta = (y.array() + 0.5).log().matrix();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(x.cols());
  for (int it = 0; it < 100; ++it) {
    const Eigen::ArrayXd mu = eta.array().exp();
    const Eigen::VectorXd work = (eta.array() + (y.array() - mu) / mu).matrix();
    const Eigen::MatrixXd xw = x.array().colwise() * mu;
    const Eigen::VectorXd next = (x.transpose() * xw).ldlt().solve(xw.transpose() * work);
    const double change = (next - b).cwiseAbs().maxCoeff();
    b = next;
    eta = x * b;
    if (change < 1e-13) break;
  }
  return b;
}

DesignSpec poisson_truth_design() {
  DesignSpec d;
  d.variables = {"ND_I", "VAL_I", "INV_I"};
  d.split = {"VAL_I"};
  d.controls = {"VOLP", "DEBT_COST", "EP", "SIZE"};
  return d;
}

Outcome poisson_gmm_recovery() {
  const int reps = 200;
  std::map<std::string, int> inside;
  std::size_t rows = 0, columns = 0;
  int failures = 0;
  for (int r = 1; r <= reps; ++r) {
    PoissonDgp spec;
    spec.seed = static_cast<std::uint64_t>(r);
    spec.first = Quarter{2000, 3};
    spec.quarters = 45;  // two lag quarters leave 43 estimation quarters
    const auto sample = sim_poisson_panel(spec);
    columns = sample.truth_columns.size();
    const auto d = build_design(sample.panel, poisson_truth_design(), spec.crisis);
    rows = static_cast<std::size_t>(d.rows());
    GmmResult fit;
    try {
      fit = poisson_gmm(d);
    } catch (const Error&) {
      ++failures;
      continue;
    }
    for (const auto& [name, b] : sample.truth_columns) {
      const auto j = fit.index(name);
      inside[name] += std::abs(fit.coef[j] - b) <= 2.0 * fit.se[j];
    }
  }
  double lowest = 100.0;
  std::string weakest;
  for (const auto& [name, k] : inside) {
    if (pct(k, reps) < lowest) lowest = pct(k, reps), weakest = name;
  }

  PoissonDgp spec;
  spec.seed = 999;
  spec.quarters = 44;
  auto just = poisson_truth_design();
  just.instrument_lags.clear();
  const auto d = build_design(sim_poisson_panel(spec).panel, just, spec.crisis);
  const auto fit = poisson_gmm(d);
  const double gap = (fit.coef - irls_poisson(d.x, d.y)).cwiseAbs().maxCoeff();

  const bool pass = failures == 0 && inside.size() == columns && lowest >= 90.0 && gap <= 1e-6;
  return {pass, std::to_string(reps) + " panels of " + std::to_string(rows) + " rows, lowest coverage " + fmt(lowest, 3) +
                    "% (" + weakest + "), " + std::to_string(failures) + " failed fits; just-identified vs PMLE " +
                    fmt(gap, 3)};
}

// ---------------------------------------------------------------------------
// 9. BIC lag selection.

Outcome bic_selection() {
  Eigen::Matrix2d a;
  a << 0.4, 0.1, 0.2, 0.3;
  int correct = 0;
  for (int s = 1; s <= 100; ++s) {
    Rng rng(static_cast<std::uint64_t>(s), 99);
    const std::size_t n = 5000, burn = 200;
    std::vector<double> fin, ind;
    Eigen::Vector2d y = Eigen::Vector2d::Zero();
    for (std::size_t t = 0; t < n + burn; ++t) {
      Eigen::Vector2d e(rng.normal(), rng.normal());
      y = Eigen::Vector2d(0.1, -0.05) + a * y + e;
      if (t >= burn) fin.push_back(y[0]), ind.push_back(y[1]);
    }
    correct += select_lag_bic(fin, ind, 6) == 1;
  }
  return {correct >= 90, std::to_string(correct) + "/100 seeds select p=1 (p_max=6, T=5000)"};
}

// ---------------------------------------------------------------------------
// 10. Prais-Winsten.

Outcome prais_winsten_checks() {
  ArPanelDgp zero;
  zero.rho = 0.0;
  zero.seed = 10;
  const auto d0 = sim_ar_panel(zero);
  const auto pw0 = prais_winsten(d0, {0.0});
  const auto ols = least_squares(d0.x, d0.y, "ols");
  const double gap = (pw0.coef - ols.coef).cwiseAbs().maxCoeff();

  ArPanelDgp ar;
  ar.rho = 0.6;
  ar.periods = 2000;
  ar.seed = 11;
  const auto pw = prais_winsten(sim_ar_panel(ar));
  return {gap <= 1e-6 && std::abs(pw.rho - 0.6) <= 0.05,
          "rho=0: max |PW - OLS| " + fmt(gap, 3) + "; rho=0.6: estimate " + fmt(pw.rho, 4)};
}

// ---------------------------------------------------------------------------
// 11. End-to-end determinism of the command-line pipeline.

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream f(e.path(), std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    out[fs::relative(e.path(), dir).string()] = s.str();
  }
  return out;
}

Outcome end_to_end() {
  const auto dir = fs::temp_directory_path() / "spillover_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto cfg = dir / "run.cfg";
  {
    std::ofstream f(cfg);
    f << "returns = data/returns.csv\naccounting = data/accounting.csv\nhhi = data/hhi.csv\n"
         "firm_returns = data/firm_returns.csv\noutput = out\nseed = 11\n"
      << "workers = " << std::max(1u, std::thread::hardware_concurrency()) << "\n";
  }
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::map<std::string, std::string>> runs;
  for (int run = 0; run < 2; ++run) {
    for (const char* cmd : {"simulate", "spillover", "ccx", "characteristics", "regress", "dd"}) {
      const std::string line = std::string("\"") + SPILLOVER_CLI + "\" " + cmd + " --config \"" + cfg.string() +
                               "\" > \"" + (dir / "log.txt").string() + "\" 2>&1";
      if (std::system(line.c_str()) != 0) return {false, std::string("subcommand ") + cmd + " failed in run " + std::to_string(run + 1)};
    }
    auto snap = snapshot(dir / "out");
    for (auto& [k, v] : snapshot(dir / "data")) snap["data/" + k] = std::move(v);
    runs.push_back(std::move(snap));
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::size_t differing = 0;
  for (const auto& [name, text] : runs[0]) {
    auto it = runs[1].find(name);
    differing += it == runs[1].end() || it->second != text;
  }
  differing += runs[0].size() != runs[1].size();
  return {differing == 0 && seconds < 600.0,
          std::to_string(runs[0].size()) + " files, " + std::to_string(differing) + " differing; two full runs in " +
              fmt(seconds, 3) + " s"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"economic impact cross-check", economic_impact_check},
      {"competition classification counts", classification_counts},
      {"GARCH recovery", garch_recovery},
      {"spillover size and power", spillover_size_power},
      {"CCX independence and crisis boost", ccx_checks},
      {"Wilcoxon exactness", wilcoxon_exactness},
      {"Merton round trip", merton_round_trip},
      {"Poisson GMM recovery", poisson_gmm_recovery},
      {"BIC lag selection", bic_selection},
      {"Prais-Winsten", prais_winsten_checks},
      {"end-to-end determinism", end_to_end}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("%s criterion %zu (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), s);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
