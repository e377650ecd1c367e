#include <catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <numeric>
#include <thread>

#include "hjacobi/pd.hpp"

using namespace hjacobi;
using Catch::Approx;

namespace {

// E_θ[∏φ_{m_j}] from the Poisson–Dirichlet correlation measures: summing over
// set partitions of the factors, each block B of merged exponents M_B
// contributes θ Γ(M_B), times Γ(θ)/Γ(θ + Σm).
double partition_oracle(double theta, const std::vector<int>& m) {
  const std::size_t K = m.size();
  const int total = std::accumulate(m.begin(), m.end(), 0);
  std::vector<int> block_of(K, 0);
  double sum = 0.0;
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int blocks) {
    if (i == K) {
      std::vector<int> mass(blocks, 0);
      for (std::size_t j = 0; j < K; ++j) mass[block_of[j]] += m[j];
      double lg = 0.0;
      for (int b : mass) lg += std::log(theta) + std::lgamma(b);
      sum += std::exp(lg + std::lgamma(theta) - std::lgamma(theta + total));
      return;
    }
    for (int b = 0; b <= blocks; ++b) {
      block_of[i] = b;
      rec(i + 1, std::max(blocks, b + 1));
    }
  };
  rec(0, 0);
  return sum;
}

}  // namespace

TEST_CASE("phi_m conventions") {
  const std::vector<double> vertex{1.0, 0.0, 0.0};
  for (double m : {1.5, 2.0, 3.0, 7.5}) CHECK(phi_m(vertex, m) == 1.0);
  const std::vector<double> flat(8, 0.125);
  for (double m : {2.0, 3.0, 2.5}) CHECK(phi_m(flat, m) == Approx(std::pow(8.0, 1.0 - m)));
  CHECK(phi_m(std::vector<double>{0.3}, 1.0) == 1.0);
  CHECK_THROWS_AS(phi_m(flat, 0.5), ValidationError);
}

TEST_CASE("moment recursion closed forms") {
  CHECK(moment_recursion(1.0, {2}) == Approx(0.5).epsilon(1e-15));
  CHECK(moment_recursion(1.0, {3}) == Approx(1.0 / 3).epsilon(1e-15));
  for (double theta : {0.1, 0.5, 1.0, 2.0, 7.3}) CHECK(moment_recursion(theta, {2}) == Approx(1.0 / (1.0 + theta)));
  CHECK_THROWS_AS(moment_recursion(1.0, {1, 2}), ValidationError);
  CHECK(MomentRecursion(2.0).expect({1, 1}) == 1.0);
}

TEST_CASE("moment recursion matches the partition oracle") {
  for (double theta : {0.3, 1.0, 2.0, 4.5})
    for (const auto& m : multisets_up_to(10)) {
      INFO("theta=" << theta << " m=" << multiset_id(m));
      REQUIRE(moment_recursion(theta, m) == Approx(partition_oracle(theta, m)).epsilon(1e-12));
    }
}

TEST_CASE("moments decrease in m") {
  for (double theta : {0.5, 1.0, 2.0})
    for (int m = 2; m < 10; ++m) CHECK(moment_recursion(theta, {m + 1}) < moment_recursion(theta, {m}));
}

TEST_CASE("recursion cache is safe under concurrent use") {
  const MomentRecursion rec(1.7);
  const auto sets = multisets_up_to(9);
  std::vector<std::vector<double>> results(4, std::vector<double>(sets.size()));
  std::vector<std::thread> pool;
  for (int t = 0; t < 4; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = 0; i < sets.size(); ++i) results[t][(i * (t + 1)) % sets.size()] = 0.0;
      for (std::size_t i = 0; i < sets.size(); ++i) results[t][i] = rec.expect(sets[i]);
    });
  for (auto& th : pool) th.join();
  for (int t = 1; t < 4; ++t) CHECK(results[t] == results[0]);
}

TEST_CASE("multiset enumeration") {
  const auto s = multisets_up_to(6);
  // partitions of 2..6 into parts >= 2: 1 + 1 + 2 + 2 + 4
  CHECK(s.size() == 10);
  CHECK(s.front() == std::vector<int>{2});
  CHECK(multiset_id({2, 3}) == "{2,3}");
}

TEST_CASE("PD draws are ordered and account for all mass") {
  const auto draws = pd_sample(1.5, 10000, 200, 3);
  for (const auto& d : draws) {
    double s = 0.0;
    for (std::size_t k = 0; k < d.atoms.size(); ++k) {
      REQUIRE(d.atoms[k] >= 0.0);
      if (k) REQUIRE(d.atoms[k] <= d.atoms[k - 1]);
      s += d.atoms[k];
    }
    REQUIRE(s <= 1.0 + 1e-12);
    REQUIRE(std::abs(1.0 - s - d.tail) < 1e-12);
  }
  const auto short_run = pd_sample(2.0, 40, 100, 4, 0.0);
  for (const auto& d : short_run) REQUIRE(d.atoms.size() == 40);
}

TEST_CASE("truncation length is checked") {
  CHECK_THROWS_AS(pd_sample(1.0, 10, 5, 1), ValidationError);
  CHECK_THROWS_AS(pd_sample(1.0, 5, 5, 1), ValidationError);
  CHECK_THROWS_AS(pd_sample(-1.0, 100, 5, 1), ValidationError);
  CHECK_NOTHROW(pd_sample(1.0, 30, 5, 1));
}

TEST_CASE("PD Monte Carlo moments match the recursion") {
  PDConfig cfg{1.0, {}, 10000};
  std::vector<RunningStats> s(3);
  for_each_pd_draw(cfg, 40000, 9, [&](std::span<const double> y, double) {
    const double p2 = phi_m(y, 2), p3 = phi_m(y, 3);
    s[0].add(p2);
    s[1].add(p3);
    s[2].add(p2 * p2);
  });
  CHECK(std::abs(s[0].mean() - 0.5) < 3.0 * s[0].stderr_mean());
  CHECK(std::abs(s[1].mean() - 1.0 / 3) < 3.0 * s[1].stderr_mean());
  CHECK(std::abs(s[2].mean() - moment_recursion(1.0, {2, 2})) < 3.0 * s[2].stderr_mean());
}

TEST_CASE("tilted expectations") {
  PDConfig plain{1.0, {0.0}, 10000};
  const auto f = phi_function(2);
  const auto a = tilted_expect(plain, f, 20000, 5);
  RunningStats direct;
  for_each_pd_draw(plain, 20000, 5, [&](std::span<const double> y, double) { direct.add(phi_m(y, 2)); });
  CHECK(a.value == Approx(direct.mean()).epsilon(1e-12));
  CHECK(a.ess == Approx(20000.0));

  PDConfig tilt{1.0, {1.0}, 10000};
  const KingmanFunction one{"one", [](std::span<const double>) { return 1.0; }};
  CHECK(tilted_expect(tilt, one, 5000, 6).value == 1.0);

  const auto s1 = tilted_expect(tilt, f, 40000, 7);
  const auto s2 = tilted_expect(tilt, f, 40000, 8);
  CHECK(std::abs(s1.value - s2.value) < 3.0 * std::hypot(s1.se, s2.se));
  // reweighting toward a large leading atom raises φ_2
  CHECK(s1.value > 0.5);
}

TEST_CASE("heavy tilts trip the ESS floor") {
  PDConfig heavy{1.0, {200.0}, 10000};
  CHECK_THROWS_AS(tilted_expect(heavy, phi_function(2), 2000, 1), NumericalError);
}

TEST_CASE("tilt condition is strict") {
  PDConfig bad{1.0, {0.3, -1.0}, 10000};
  CHECK_THROWS_AS(bad.check(), ValidationError);
  PDConfig ok{1.0, {0.3, -0.99}, 10000};
  CHECK_NOTHROW(ok.check());
}
