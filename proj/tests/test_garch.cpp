#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "spillover/garch.hpp"
#include "spillover/synth.hpp"

using namespace spillover;
using Catch::Approx;

namespace {

// Plain recursion written out independently of garch_filter.
std::vector<double> reference_filter(double w, double a, double b, const std::vector<double>& r, double s0) {
  std::vector<double> out(r.size());
  out[0] = s0;
  for (std::size_t t = 1; t < r.size(); ++t) out[t] = w + a * r[t - 1] * r[t - 1] + b * out[t - 1];
  return out;
}

double reference_normal_loglik(const std::vector<double>& r, const std::vector<double>& s2) {
  double ll = 0.0;
  for (std::size_t t = 0; t < r.size(); ++t)
    ll += -0.5 * (std::log(2.0 * M_PI) + std::log(s2[t]) + r[t] * r[t] / s2[t]);
  return ll;
}

}  // namespace

TEST_CASE("filter and likelihood match a direct evaluation", "[garch]") {
  Rng rng(3, 0);
  std::vector<double> r(400);
  for (auto& v : r) v = rng.normal();
  const GarchParams p{0.1, 0.07, 0.88, std::nullopt};
  const auto s2 = garch_filter(p, r, 1.3);
  const auto ref = reference_filter(0.1, 0.07, 0.88, r, 1.3);
  for (std::size_t t = 0; t < r.size(); ++t) REQUIRE(s2[t] == Approx(ref[t]).epsilon(1e-14));
  REQUIRE(garch_loglik(p, r, Distribution::normal, 1.3) == Approx(reference_normal_loglik(r, ref)).epsilon(1e-12));
}

TEST_CASE("analytic GARCH-X gradient agrees with central differences", "[garch]") {
  Rng rng(5, 0);
  std::vector<double> r(600), x(600);
  for (std::size_t t = 0; t < r.size(); ++t) {
    r[t] = rng.normal();
    x[t] = std::pow(rng.normal(), 2);
  }
  for (auto dist : {Distribution::normal, Distribution::student_t}) {
    detail::GarchXModel model{r, {x}, dist, 1.0};
    Eigen::VectorXd theta(model.num_params());
    theta << 0.08, 0.06, 0.85, 0.03;
    if (dist == Distribution::student_t) {
      theta.conservativeResize(5);
      theta[4] = 7.0;
    }
    Eigen::VectorXd g;
    model.loglik(theta, &g);
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(theta[j]));
      Eigen::VectorXd up = theta, dn = theta;
      up[j] += h;
      dn[j] -= h;
      const double fd = (model.loglik(up, nullptr) - model.loglik(dn, nullptr)) / (2.0 * h);
      REQUIRE(g[j] == Approx(fd).epsilon(1e-5).margin(1e-5));
    }
  }
}

TEST_CASE("GARCH(1,1) recovers known parameters", "[garch]") {
  const GarchParams truth{0.1, 0.05, 0.90, std::nullopt};
  Rng rng(11, stream::garch);
  const auto sample = simulate_garch(truth, 20000, rng);
  const auto fit = fit_garch11(sample.returns);
  REQUIRE(fit.converged);
  REQUIRE_FALSE(fit.boundary);
  REQUIRE(std::abs(fit.params.omega - truth.omega) < 4.0 * fit.se_omega);
  REQUIRE(std::abs(fit.params.alpha - truth.alpha) < 4.0 * fit.se_alpha);
  REQUIRE(std::abs(fit.params.beta - truth.beta) < 4.0 * fit.se_beta);
  // Standardized residuals have unit variance by construction of the fit.
  REQUIRE(sample_variance(fit.standardized_residuals) == Approx(1.0).margin(0.05));
}

TEST_CASE("fit is invariant to rescaling the returns", "[garch]") {
  const GarchParams truth{0.1, 0.08, 0.88, std::nullopt};
  Rng rng(13, stream::garch);
  const auto sample = simulate_garch(truth, 3000, rng);
  std::vector<double> scaled(sample.returns);
  for (auto& v : scaled) v *= 0.01;
  const auto a = fit_garch11(sample.returns);
  const auto b = fit_garch11(scaled);
  REQUIRE(b.params.alpha == Approx(a.params.alpha).epsilon(1e-5));
  REQUIRE(b.params.beta == Approx(a.params.beta).epsilon(1e-5));
  REQUIRE(b.params.omega == Approx(a.params.omega * 1e-4).epsilon(1e-4));
}

TEST_CASE("Student-t GARCH estimates the degrees of freedom", "[garch]") {
  const GarchParams truth{0.05, 0.08, 0.9, 6.0};
  Rng rng(17, stream::garch);
  const auto sample = simulate_garch(truth, 20000, rng, Distribution::student_t);
  const auto fit = fit_garch11(sample.returns, Distribution::student_t);
  REQUIRE(fit.params.dof.has_value());
  REQUIRE(std::abs(*fit.params.dof - 6.0) < 4.0 * fit.se_dof.value());
  REQUIRE(fit.loglik > fit_garch11(sample.returns).loglik);
}

TEST_CASE("GARCH input errors", "[garch]") {
  std::vector<double> shortr(100, 0.01);
  REQUIRE_THROWS_AS(fit_garch11(shortr), DataError);
  std::vector<double> flat(1000, 0.0);
  REQUIRE_THROWS_AS(fit_garch11(flat), DataError);
  Rng rng(1, 0);
  REQUIRE_THROWS_AS(simulate_garch(GarchParams{0.1, 0.5, 0.6, std::nullopt}, 10, rng), DataError);
}

TEST_CASE("spillover variance with zero loadings is plain GARCH", "[garch][spillover]") {
  Rng rng(19, 0);
  const std::size_t n = 1000;
  std::vector<double> e(n), z(n);
  std::vector<bool> crisis(n);
  for (std::size_t t = 0; t < n; ++t) {
    e[t] = rng.normal();
    z[t] = rng.normal();
    crisis[t] = t >= 600 && t < 800;
  }
  const SpilloverParams p{0.05, 0.05, 0.9, 0.0, 0.0, std::nullopt};
  const auto sim = simulate_spillover_industry(p, e, crisis, z);
  const auto ref = reference_filter(0.05, 0.05, 0.9, sim.returns, sim.variance[0]);
  for (std::size_t t = 0; t < n; ++t) REQUIRE(sim.variance[t] == Approx(ref[t]).epsilon(1e-13));
}

TEST_CASE("spillover GARCH detects a loaded financial shock", "[garch][spillover]") {
  Rng rng(23, 0);
  const std::size_t n = 5000;
  std::vector<double> e(n), z(n);
  std::vector<bool> crisis(n);
  for (std::size_t t = 0; t < n; ++t) {
    e[t] = rng.normal();
    z[t] = rng.normal();
    crisis[t] = t >= 3000 && t < 4000;
  }
  const SpilloverParams p{0.05, 0.05, 0.8, 0.1, 0.1, std::nullopt};
  const auto sim = simulate_spillover_industry(p, e, crisis, z);
  const auto fit = fit_spillover(sim.returns, e, crisis);
  REQUIRE(fit.converged);
  REQUIRE(fit.normal_spillover());
  REQUIRE(std::abs(fit.params.gamma1 - 0.1) < 4.0 * fit.se_gamma1);
  REQUIRE(std::abs(fit.params.gamma2 - 0.1) < 4.0 * fit.se_gamma2);
  REQUIRE(fit.total_crisis_effect == Approx(fit.params.gamma1 + fit.params.gamma2));
  REQUIRE(fit.t_total_crisis_effect > fit.t_gamma2);
}

TEST_CASE("unidentified spillover regressors are dropped", "[garch][spillover]") {
  Rng rng(29, 0);
  const std::size_t n = 1500;
  std::vector<double> e(n), r(n);
  for (std::size_t t = 0; t < n; ++t) {
    e[t] = rng.normal();
    r[t] = rng.normal();
  }
  const std::vector<bool> calm(n, false);
  const auto fit = fit_spillover(r, e, calm);
  REQUIRE(fit.gamma1_identified);
  REQUIRE_FALSE(fit.gamma2_identified);
  REQUIRE(fit.params.gamma2 == 0.0);
  REQUIRE(std::isnan(fit.t_gamma2));
  REQUIRE_FALSE(fit.crisis_amplification());

  const std::vector<double> zeros(n, 0.0);
  const auto none = fit_spillover(r, zeros, calm);
  REQUIRE_FALSE(none.gamma1_identified);
  REQUIRE(std::isnan(none.t_total_crisis_effect));
}
