#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "spillover/numeric.hpp"
#include "spillover/random.hpp"

using spillover::Philox4x32;
using spillover::Rng;

TEST_CASE("Philox4x32-10 known-answer vectors") {
  const auto zero = Philox4x32::apply({0, 0, 0, 0}, {0, 0});
  CHECK(zero == Philox4x32::Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});

  const auto pi = Philox4x32::apply({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  CHECK(pi == Philox4x32::Block{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("same seed and stream reproduce the sequence") {
  Rng a(42, 7);
  Rng b(42, 7);
  Rng c(42, 8);
  bool any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    REQUIRE(x == b.next_u64());
    any_diff |= x != c.next_u64();
  }
  CHECK(any_diff);
}

TEST_CASE("distribution moments") {
  Rng rng(2024);
  const int n = 200000;
  std::vector<double> u(n), z(n), g(n), t(n);
  for (int i = 0; i < n; ++i) {
    u[i] = rng.uniform();
    z[i] = rng.normal();
    g[i] = rng.gamma(2.5);
    t[i] = rng.standardized_t(6.0);
  }
  CHECK(spillover::mean(u) == Catch::Approx(0.5).margin(0.005));
  CHECK(spillover::mean(z) == Catch::Approx(0.0).margin(0.01));
  CHECK(spillover::sample_variance(z) == Catch::Approx(1.0).margin(0.015));
  CHECK(spillover::mean(g) == Catch::Approx(2.5).margin(0.02));
  CHECK(spillover::sample_variance(g) == Catch::Approx(2.5).margin(0.06));
  CHECK(spillover::sample_variance(t) == Catch::Approx(1.0).margin(0.05));
  for (double v : u) REQUIRE((v > 0.0 && v < 1.0));
}

TEST_CASE("Poisson draws match mean and variance on both code paths") {
  for (double lambda : {0.7, 4.0, 25.0, 300.0}) {
    Rng rng(11, static_cast<std::uint64_t>(lambda * 10));
    const int n = 100000;
    std::vector<double> k(n);
    for (int i = 0; i < n; ++i) k[i] = static_cast<double>(rng.poisson(lambda));
    const double se = std::sqrt(lambda / n);
    CHECK(std::abs(spillover::mean(k) - lambda) < 5.0 * se);
    CHECK(spillover::sample_variance(k) == Catch::Approx(lambda).epsilon(0.03));
  }
}
