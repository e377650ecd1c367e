#include <catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "hjacobi/functional.hpp"
#include "hjacobi/wealth.hpp"
#include "support.hpp"

using namespace hjacobi;
using Catch::Approx;

TEST_CASE("market portfolio keeps unit wealth") {
  const auto path = simulate(ModelParams::rank_jacobi({1, 0.5, 0.5}), SimplexVec::uniform(3), 5.0, 1e-3, 1);
  for (auto scheme : {WealthScheme::ito, WealthScheme::compounded}) {
    WealthOptions o;
    o.scheme = scheme;
    const auto l = wealth(path, StrategySpec::market(), o);
    CHECK(l.log_v.front() == 0.0);
    for (double v : l.log_v) REQUIRE(std::abs(v) < 1e-12);
    CHECK(l.max_budget_error < 1e-12);
  }
}

TEST_CASE("ledger decomposes into drift and martingale parts") {
  const auto p = ModelParams::rank_jacobi({1.5, 1.5, 1.5});
  const auto path = simulate(p, SimplexVec::uniform(3), 5.0, 1e-3, 2);
  const auto l = wealth(path, StrategySpec::growth_optimal(p, 1));
  REQUIRE(l.log_v.size() == path.size());
  for (std::size_t n = 0; n < l.log_v.size(); ++n)
    REQUIRE(std::abs(l.log_v[n] - (l.drift_part[n] + l.mart_part[n])) < 1e-10);
  CHECK(l.strategy_id == "hat_theta_N1");
}

TEST_CASE("single-asset holding reproduces the weight ratio") {
  const auto p = ModelParams::rank_jacobi({1, 1, 1});
  const auto path = simulate(p, SimplexVec({0.5, 0.3, 0.2}), 3.0, 1e-3, 3);
  const auto hold2 = StrategySpec::raw("hold_2", [](double, std::span<const double> x, std::span<double> th) {
    std::fill(th.begin(), th.end(), 0.0);
    th[1] = 1.0 / x[1];
    return true;
  });
  const double exact = std::log(path.row(path.size() - 1)[1] / 0.3);
  WealthOptions comp;
  comp.scheme = WealthScheme::compounded;
  CHECK(wealth(path, hold2, comp).log_v.back() == Approx(exact).margin(1e-10));
  CHECK(wealth(path, hold2).log_v.back() == Approx(exact).margin(0.05));
}

TEST_CASE("shifting theta by a multiple of ones leaves increments unchanged") {
  const auto p = ModelParams::rank_jacobi({1.5, 1.5, 1.5});
  const auto path = simulate(p, SimplexVec::uniform(3), 2.0, 1e-3, 4);
  const auto base = StrategySpec::growth_optimal(p, 2);
  const auto shifted = StrategySpec::raw("shifted", [&](double t, std::span<const double> x, std::span<double> th) {
    if (!base.evaluate(t, x, th)) return false;
    for (double& v : th) v += 3.7;
    return true;
  });
  WealthOptions o;
  o.enforce_budget = false;
  const auto a = wealth(path, base, o);
  const auto b = wealth(path, shifted, o);
  for (std::size_t n = 0; n < a.log_v.size(); ++n) REQUIRE(std::abs(a.log_v[n] - b.log_v[n]) < 1e-12);
  CHECK_THROWS_AS(wealth(path, shifted), ValidationError);
}

TEST_CASE("rank-only strategy wealth is invariant under relabeling names") {
  const auto p = ModelParams::rank_jacobi({1.5, 1.2, 1.0, 0.8});
  // distinct weights at t = 0 so tie-breaking by name cannot matter
  const auto path = simulate(p, SimplexVec({0.4, 0.3, 0.2, 0.1}), 3.0, 1e-3, 5);
  SimPath perm = path;
  const std::size_t d = 4;
  const std::size_t pi[4] = {2, 0, 3, 1};
  for (std::size_t n = 0; n < path.size(); ++n)
    for (std::size_t i = 0; i < d; ++i) perm.states[n * d + i] = path.states[n * d + pi[i]];
  const auto s = StrategySpec::growth_optimal(p, 2);
  CHECK(wealth(path, s).log_v.back() == Approx(wealth(perm, s).log_v.back()).epsilon(1e-12));
}

TEST_CASE("failed evaluations hold share counts and are flagged") {
  const auto p = ModelParams::rank_jacobi({1, 1, 1});
  const auto path = simulate(p, SimplexVec::uniform(3), 1.0, 1e-3, 6);
  int calls = 0;
  const auto flaky = StrategySpec::raw("flaky", [&](double, std::span<const double>, std::span<double> th) {
    std::fill(th.begin(), th.end(), 1.0);
    return (calls++ % 10) != 3;
  });
  const auto l = wealth(path, flaky);
  CHECK(l.flagged_steps == 100);
  CHECK(std::abs(l.log_v.back()) < 1e-12);
}

TEST_CASE("constant generator gives the market portfolio") {
  const auto p = ModelParams::rank_jacobi({1, 1, 1});
  const auto path = simulate(p, SimplexVec::uniform(3), 2.0, 1e-3, 7);
  const auto r = master_formula(std::make_shared<ConstantGenerator>(), path);
  for (double v : r.theta) REQUIRE(v == Approx(1.0).epsilon(1e-15));
  CHECK(r.sup_error < 1e-12);
}

TEST_CASE("exp-linear generator: strategy formula and shrinking identity error") {
  const std::vector<double> c{0.7, -1.2, 0.4};
  const auto G = std::make_shared<ExpLinearGenerator>(c);
  const auto p = ModelParams::rank_jacobi({1, 1, 1});
  const auto coarse = simulate(p, SimplexVec::uniform(3), 1.0, 1e-3, 8);
  const auto r = master_formula(G, coarse);
  for (std::size_t n = 0; n + 1 < coarse.size(); n += 97) {
    const auto x = coarse.row(n);
    const double cx = c[0] * x[0] + c[1] * x[1] + c[2] * x[2];
    for (std::size_t i = 0; i < 3; ++i) REQUIRE(r.theta[n * 3 + i] == Approx(c[i] + 1 - cx).epsilon(1e-13));
  }
  // the identity error is O(√dt)
  CHECK(r.sup_error < 0.1);
  CHECK(r.local_time_part.back() == 0.0);
}

TEST_CASE("rank generator reproduces hat_theta off collisions") {
  const auto p = ModelParams::rank_jacobi({1.5, 1.5, 1.5, 1.5});
  const auto G = std::make_shared<RankGrowthGenerator>(p.a, 2);
  const auto spec = StrategySpec::generated(G);
  testgen::Gen g(9);
  std::vector<double> theta(4);
  for (int t = 0; t < 200; ++t) {
    const auto x = g.distinct_simplex(4);
    REQUIRE(spec.evaluate(0.0, x, theta));
    const auto direct = hat_theta_named(SimplexVec(x), p, 2);
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(theta[i] == Approx(direct[i]).epsilon(1e-12));
  }
}

TEST_CASE("rank generator drift matches a finite-difference second derivative") {
  const std::vector<double> a{1.5, 1.2, 1.0, 0.8};
  const RankGrowthGenerator G(a, 2);
  testgen::Gen g(10);
  for (int t = 0; t < 20; ++t) {
    const auto x = g.distinct_simplex(4);
    // −½ Σ c_ij ∂_ij G / G via central differences of G = exp(log G)
    const double h = 1e-5, sigma = 1.3;
    const double g0 = std::exp(G.log_value(x));
    double acc = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        auto at = [&](double di, double dj) {
          auto y = x;
          y[i] += di;
          y[j] += dj;
          return std::exp(G.log_value(y));
        };
        const double dij = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h);
        const double cij = sigma * sigma * x[i] * ((i == j ? 1.0 : 0.0) - x[j]);
        acc += cij * dij;
      }
    REQUIRE(G.drift_rate(x, sigma) == Approx(-0.5 * acc / g0).epsilon(1e-4));
  }
}

TEST_CASE("rank generator master formula holds with local-time terms") {
  // the occupation estimate of local time runs low at the default bandwidth, so
  // the check is that the local-time terms remove most of the discrepancy
  const auto p = ModelParams::rank_jacobi({1.5, 1.5, 1.5});
  const auto G = std::make_shared<RankGrowthGenerator>(p.a, 1);
  double with = 0.0, without = 0.0;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto path = simulate(p, SimplexVec::uniform(3), 5.0, 2.5e-4, seed);
    const auto r = master_formula(G, path);
    CHECK(r.local_time_part.back() < 0.0);
    with += std::abs(r.identity_error.back());
    without += std::abs(r.identity_error.back() - r.local_time_part.back());
  }
  CHECK(with < 0.3 * without);
}
