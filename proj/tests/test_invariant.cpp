#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hjacobi/ergodic.hpp"
#include "hjacobi/invariant.hpp"
#include "hjacobi/quadrature.hpp"
#include "support.hpp"

using namespace hjacobi;
using Catch::Approx;

namespace {

std::vector<std::vector<double>> permutation_hints(const ModelParams& p) {
  std::vector<std::vector<double>> out;
  std::vector<double> g = p.gamma;
  std::sort(g.begin(), g.end());
  do {
    std::vector<double> b(p.dim());
    for (std::size_t k = 0; k < p.dim(); ++k) b[k] = p.a[k] + g[k];
    out.push_back(b);
  } while (std::next_permutation(g.begin(), g.end()));
  return out;
}

// E_q[f] by ordered-simplex quadrature of f·q, independent of the samplers.
template <class F>
double quadrature_moment(const ModelParams& p, F f) {
  const auto hints = permutation_hints(p);
  const auto num = integrate_ordered(
      [&](std::span<const double> y) {
        double dens = 0.0;
        for (const auto& b : hints) {
          double lp = 0.0;
          for (std::size_t k = 0; k < y.size(); ++k) lp += (b[k] - 1.0) * std::log(y[k]);
          dens += std::exp(lp);
        }
        // the integrator multiplies by ∏ y^{b−1} for its own b; divide it back out
        double lp0 = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) lp0 += (hints[0][k] - 1.0) * std::log(y[k]);
        return f(y) * dens / std::exp(lp0);
      },
      hints[0], hints);
  const auto den = integrate_ordered(
      [&](std::span<const double> y) {
        double dens = 0.0, lp0 = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) lp0 += (hints[0][k] - 1.0) * std::log(y[k]);
        for (const auto& b : hints) {
          double lp = 0.0;
          for (std::size_t k = 0; k < y.size(); ++k) lp += (b[k] - 1.0) * std::log(y[k]);
          dens += std::exp(lp);
        }
        return dens / std::exp(lp0);
      },
      hints[0], hints);
  return num.value / den.value;
}

struct Moments {
  RunningStats y1, y2, y1sq;
};

Moments ranked_moments(const InvariantSpec& spec, std::size_t n, std::uint64_t seed, SamplerDiagnostics* diag = nullptr) {
  Moments m;
  const auto dg = for_each_invariant_draw(spec, n, seed, Frame::ranked, [&](std::span<const double> y) {
    m.y1.add(y[0]);
    m.y2.add(y[1]);
    m.y1sq.add(y[0] * y[0]);
  });
  if (diag) *diag = dg;
  return m;
}

}  // namespace

TEST_CASE("rank-only density is symmetric under relabeling") {
  const auto p = ModelParams::rank_jacobi({1.5, 0.7, 2.0});
  testgen::Gen g(2);
  for (int t = 0; t < 50; ++t) {
    auto x = g.simplex(3);
    const double v = density_p_unnormalized(x, p);
    std::rotate(x.begin(), x.begin() + 1, x.end());
    REQUIRE(density_p_unnormalized(x, p) == Approx(v).epsilon(1e-14));
  }
}

TEST_CASE("name-only density is the Dirichlet form") {
  const ModelParams p({0, 0, 0}, {1.5, 2.0, 0.5}, 1.0);
  const SimplexVec x({0.2, 0.3, 0.5});
  CHECK(density_p(x, p) == Approx(std::pow(0.2, 0.5) * std::pow(0.3, 1.0) * std::pow(0.5, -0.5)));
  const auto z = normalizer_Z(p);
  const double dirichlet = std::exp(std::lgamma(1.5) + std::lgamma(2.0) + std::lgamma(0.5) - std::lgamma(4.0));
  CHECK(z.value == Approx(dirichlet).epsilon(1e-7));
}

TEST_CASE("two-dimensional normalizers") {
  CHECK(normalizer_Z(ModelParams::rank_jacobi({1, 1})).value == Approx(1.0).epsilon(1e-10));
  CHECK(normalizer_Z(ModelParams({0, 0}, {1, 1}, 1.0)).value == Approx(1.0).epsilon(1e-10));
  CHECK(density_p(SimplexVec({0.3, 0.7}), ModelParams::rank_jacobi({1, 1}), true) == Approx(1.0).epsilon(1e-10));
  CHECK(normalizer_Z(ModelParams::rank_jacobi({1, 0})).diverged);
}

TEST_CASE("rank-only q is the product form over Q_a") {
  const auto p = ModelParams::rank_jacobi({1, 1});
  CHECK(density_q(RankedVec({0.6, 0.4}), p, true) == Approx(2.0).epsilon(1e-10));
  const auto p3 = ModelParams::rank_jacobi({1.5, 0.8, 1.2});
  const RankedVec y({0.5, 0.3, 0.2});
  const double qa = qb_quadrature(p3.a).value;
  const double expect = std::pow(0.5, 0.5) * std::pow(0.3, -0.2) * std::pow(0.2, 0.2) / qa;
  CHECK(density_q(y, p3, true) == Approx(expect).epsilon(1e-7));
}

TEST_CASE("name-only q sums over all assignments of names to ranks") {
  const ModelParams p({0, 0, 0}, {0.7, 1.3, 2.1}, 1.0);
  testgen::Gen g(4);
  for (int t = 0; t < 20; ++t) {
    auto y = g.simplex(3);
    std::sort(y.begin(), y.end(), std::greater<>());
    double brute = 0.0;
    std::vector<int> tau{0, 1, 2};
    do {
      double v = 1.0;
      for (int k = 0; k < 3; ++k) v *= std::pow(y[k], p.gamma[tau[k]] - 1.0);
      brute += v;
    } while (std::next_permutation(tau.begin(), tau.end()));
    REQUIRE(density_q_unnormalized(y, p) == Approx(brute).epsilon(1e-13));
  }
}

TEST_CASE("normalized q integrates to one over the ordered simplex") {
  const std::vector<ModelParams> cases = {ModelParams::rank_jacobi({1.0, 0.6, 0.9}),
                                          ModelParams({0, 0, 0}, {0.8, 1.2, 2.0}, 1.0),
                                          ModelParams({0.5, 0.3, 0.2}, {0.6, 0.4, 0.5}, 1.0),
                                          ModelParams::rank_jacobi({2.0, 0.5})};
  for (const auto& p : cases) {
    const double z = normalizer_Z(p).value;
    const auto hints = permutation_hints(p);
    const auto r = integrate_ordered(
        [&](std::span<const double> y) {
          double lp0 = 0.0;
          for (std::size_t k = 0; k < y.size(); ++k) lp0 += (p.a[k] - 1.0) * std::log(y[k]);
          return density_q_unnormalized(y, p) / z / std::exp(lp0);
        },
        p.a, hints);
    CHECK(r.value == Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("sampler routing") {
  CHECK(InvariantSpec::for_params(ModelParams({0, 0}, {1, 2}, 1.0)).kind == SamplerKind::exact_dirichlet);
  CHECK(InvariantSpec::for_params(ModelParams::rank_jacobi({1, 2})).kind == SamplerKind::exponential_spacing);
  CHECK(InvariantSpec::for_params(ModelParams({1, 1}, {1, 2}, 1.0)).kind == SamplerKind::mcmc);
  CHECK_THROWS_AS(InvariantSpec::for_params(ModelParams::rank_jacobi({1, 0})), ValidationError);
}

TEST_CASE("symmetric Dirichlet sampler mean") {
  const auto spec = InvariantSpec::for_params(ModelParams({0, 0}, {2, 2}, 1.0));
  RunningStats s;
  for_each_invariant_draw(spec, 50000, 1, Frame::named, [&](std::span<const double> x) { s.add(x[0]); });
  CHECK(std::abs(s.mean() - 0.5) < 3.0 * s.stderr_mean());
}

TEST_CASE("spacing sampler matches quadrature moments") {
  {
    const auto p = ModelParams::rank_jacobi({1, 1, 1});
    const double truth = qb_quadrature(std::vector<double>{2, 1, 1}).value / qb_quadrature(p.a).value;
    const auto m = ranked_moments(InvariantSpec::for_params(p), 100000, 3);
    CHECK(std::abs(m.y1.mean() - truth) < 3.0 * m.y1.stderr_mean());
  }
  {
    const auto p = ModelParams::rank_jacobi({2, 1});
    const double truth = qb_quadrature(std::vector<double>{2, 2}).value / qb_quadrature(p.a).value;
    const auto m = ranked_moments(InvariantSpec::for_params(p), 100000, 4);
    CHECK(std::abs(m.y2.mean() - truth) < 3.0 * m.y2.stderr_mean());
  }
  {
    // negative leading rank drift exercises the (1/d)^{ā_1} rejection bound
    const auto p = ModelParams::rank_jacobi({-0.5, 1.0, 0.8});
    const double truth = quadrature_moment(p, [](std::span<const double> y) { return y[0]; });
    SamplerDiagnostics diag;
    const auto m = ranked_moments(InvariantSpec::for_params(p), 100000, 5, &diag);
    CHECK(diag.ok);
    CHECK(diag.acceptance_rate > 0.0);
    CHECK(std::abs(m.y1.mean() - truth) < 3.0 * m.y1.stderr_mean());
  }
}

TEST_CASE("ranked Dirichlet draws match quadrature moments") {
  const ModelParams p({0, 0, 0}, {0.8, 1.2, 2.0}, 1.0);
  const double t1 = quadrature_moment(p, [](std::span<const double> y) { return y[0]; });
  const double t2 = quadrature_moment(p, [](std::span<const double> y) { return y[1]; });
  const auto m = ranked_moments(InvariantSpec::for_params(p), 100000, 6);
  CHECK(std::abs(m.y1.mean() - t1) < 3.0 * m.y1.stderr_mean());
  CHECK(std::abs(m.y2.mean() - t2) < 3.0 * m.y2.stderr_mean());
}

TEST_CASE("MCMC agrees with the exact spacing sampler") {
  const auto p = ModelParams::rank_jacobi({1.2, 0.8, 1.0});
  const auto exact = ranked_moments(InvariantSpec::for_params(p), 100000, 7);
  InvariantSpec mc = InvariantSpec::for_params(p);
  mc.kind = SamplerKind::mcmc;
  SamplerDiagnostics diag;
  const auto chain = ranked_moments(mc, 20000, 8, &diag);
  CHECK(diag.ok);
  const double inflate = std::sqrt(std::max(1.0, diag.draws / diag.ess));
  for (auto [e, c] : {std::pair{&exact.y1, &chain.y1}, std::pair{&exact.y2, &chain.y2},
                      std::pair{&exact.y1sq, &chain.y1sq}}) {
    const double se = std::hypot(e->stderr_mean(), c->stderr_mean() * inflate);
    CHECK(std::abs(e->mean() - c->mean()) < 3.0 * se);
  }
}

TEST_CASE("MCMC on a hybrid model matches quadrature") {
  const ModelParams p({0.5, 0.3, 0.2}, {0.6, 0.4, 0.5}, 1.0);
  const double truth = quadrature_moment(p, [](std::span<const double> y) { return y[0]; });
  SamplerDiagnostics diag;
  const auto m = ranked_moments(InvariantSpec::for_params(p), 20000, 9, &diag);
  REQUIRE(diag.kind == SamplerKind::mcmc);
  CHECK(diag.ok);
  CHECK(diag.ess >= 10000);
  const double se = m.y1.stderr_mean() * std::sqrt(std::max(1.0, diag.draws / diag.ess));
  CHECK(std::abs(m.y1.mean() - truth) < 3.0 * se);
}

TEST_CASE("named frame of the spacing sampler is exchangeable") {
  const auto spec = InvariantSpec::for_params(ModelParams::rank_jacobi({2.0, 1.0, 0.5}));
  std::vector<RunningStats> s(3);
  for_each_invariant_draw(spec, 60000, 10, Frame::named, [&](std::span<const double> x) {
    for (std::size_t i = 0; i < 3; ++i) s[i].add(x[i]);
  });
  for (const auto& v : s) CHECK(std::abs(v.mean() - 1.0 / 3) < 3.0 * v.stderr_mean());
}

TEST_CASE("sampling is reproducible") {
  const auto spec = InvariantSpec::for_params(ModelParams({0.5, 0.3, 0.2}, {0.6, 0.4, 0.5}, 1.0));
  const auto a = sample_invariant(spec, 100, 12);
  const auto b = sample_invariant(spec, 100, 12);
  CHECK(a.draws == b.draws);
}

TEST_CASE("ergodic comparison of constants and leaders") {
  const auto p = ModelParams::volatility_stabilized(3, 1.5);
  ErgodicSimConfig sim;
  sim.T = 100.0;
  sim.paths = 6;
  sim.seed = 2;
  ErgodicSamplerConfig smp;
  smp.n = 30000;
  const auto r = ergodic_compare(p, {constant_one(), leader_is(1), leader_is(2), leader_is(3)}, sim, smp);
  CHECK(r.rows[0].time_avg.value == 1.0);
  CHECK(r.rows[0].invariant_avg.value == 1.0);
  CHECK(r.rows[0].z_score == 0.0);
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK(std::abs(r.rows[i].invariant_avg.value - 1.0 / 3) < 3.0 * r.rows[i].invariant_avg.se);
    CHECK(r.rows[i].pass);
  }
}

TEST_CASE("gamma variates have the right mean and variance") {
  for (double shape : {0.3, 0.8, 1.0, 2.5, 7.0}) {
    Philox4x32 rng(99, static_cast<std::uint64_t>(shape * 10));
    NormalSource normal;
    RunningStats s, s2;
    for (int i = 0; i < 200000; ++i) {
      const double g = std::exp(log_gamma_variate(rng, normal, shape));
      s.add(g);
      s2.add((g - shape) * (g - shape));
    }
    INFO("shape " << shape);
    CHECK(std::abs(s.mean() - shape) < 4.0 * s.stderr_mean());
    CHECK(std::abs(s2.mean() - shape) < 4.0 * s2.stderr_mean());
  }
}
