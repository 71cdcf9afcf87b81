#include <catch_amalgamated.hpp>

#include <cmath>

#include "spillover/synth.hpp"
#include "spillover/tail_risk.hpp"

using namespace spillover;
using Catch::Approx;

TEST_CASE("returns simulator is deterministic and self-describing", "[synth]") {
  ReturnsDgp spec;
  spec.industries = 5;
  spec.seed = 8;
  const auto a = sim_var_garch_spillover(spec);
  const auto b = sim_var_garch_spillover(spec);
  REQUIRE(returns_csv(a.panel) == returns_csv(b.panel));
  REQUIRE(a.truth == b.truth);
  spec.seed = 9;
  REQUIRE(returns_csv(sim_var_garch_spillover(spec).panel) != returns_csv(a.panel));

  REQUIRE(a.panel.industries().size() == 5);
  REQUIRE(a.truth["industries"].size() == 5);
  REQUIRE(a.truth["industries"][0]["spillover"].get<bool>());
  REQUIRE_FALSE(a.truth["industries"][1]["spillover"].get<bool>());
  // Crisis occupies the interior fifth of the sample.
  const auto flags = crisis_indicator(a.panel.calendar(), a.crisis);
  const auto n = static_cast<double>(flags.size());
  const auto inside = static_cast<double>(std::count(flags.begin(), flags.end(), true));
  REQUIRE(inside / n == Approx(0.2).margin(0.001));
  REQUIRE_FALSE(flags[static_cast<std::size_t>(0.6 * n) - 1]);
  REQUIRE(flags[static_cast<std::size_t>(0.6 * n) + 1]);
}

TEST_CASE("financial sample variance approaches its stationary value", "[synth]") {
  ReturnsDgp spec;
  spec.industries = 1;
  spec.first = make_date(1900, 1, 1);
  spec.last = make_date(2099, 12, 31);
  const auto s = sim_var_garch_spillover(spec);
  const auto fin = s.panel.column(spec.financial_id);
  const double target = spec.scale * spec.scale * spec.financial.unconditional_variance() / (1.0 - spec.ar_fin * spec.ar_fin);
  REQUIRE(sample_variance(std::vector<double>(fin.begin(), fin.end())) == Approx(target).epsilon(0.05));
}

TEST_CASE("GARCH simulator variance matches omega over one minus persistence", "[synth]") {
  const GarchParams p{0.1, 0.05, 0.9, std::nullopt};
  Rng rng(2, stream::garch);
  const auto s = simulate_garch(p, 200000, rng);
  REQUIRE(sample_variance(s.returns) == Approx(2.0).epsilon(0.03));
}

TEST_CASE("tail dependence simulator bounds", "[synth][tail]") {
  TailDependenceSpec spec;
  spec.days = 20000;
  spec.lambda = 0.0;
  auto s = sim_tail_dependence(spec);
  REQUIRE(s.expected_prob == Approx(0.0025));
  spec.lambda = 1.0;
  spec.lambda_crisis = 1.0;
  s = sim_tail_dependence(spec);
  REQUIRE(s.expected_prob == Approx(0.05));
  // Comonotone tails: every financial exceedance is shared.
  const auto fin = exceedance(s.panel.calendar(), s.panel.column("FIN"), 0.05);
  const auto ind = exceedance(s.panel.calendar(), s.panel.column("I00"), 0.05);
  REQUIRE(fin.flags == ind.flags);
  spec.lambda = 1.5;
  REQUIRE_THROWS_AS(sim_tail_dependence(spec), DataError);
}

TEST_CASE("empirical CCX likelihood tracks the analytic target", "[synth][tail]") {
  int within = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    TailDependenceSpec spec;
    spec.seed = seed;
    spec.days = 5000;
    spec.lambda = 0.1;
    spec.lambda_crisis = 0.1;
    const auto s = sim_tail_dependence(spec);
    const auto c = ccx(exceedance(s.panel.calendar(), s.panel.column("I00"), 0.05),
                       exceedance(s.panel.calendar(), s.panel.column("FIN"), 0.05));
    const double p = s.expected_prob;
    within += std::abs(c.mean() - p) < 3.0 * std::sqrt(p * (1.0 - p) / 5000.0);
  }
  REQUIRE(within >= 97);
}

TEST_CASE("firm returns follow their industry", "[synth]") {
  ReturnsDgp spec;
  spec.industries = 2;
  const auto s = sim_var_garch_spillover(spec);
  const std::map<std::string, std::string> of{{"f1", "I00"}, {"f2", "I01"}};
  const auto firms = sim_firm_returns(s.panel, {"f1", "f2"}, of, 4, 0.0);
  const auto col = s.panel.column("I01");
  REQUIRE(std::equal(col.begin(), col.end(), firms[1].returns.begin()));
  REQUIRE_THROWS_AS(sim_firm_returns(s.panel, {"f3"}, of, 4), DataError);
}
