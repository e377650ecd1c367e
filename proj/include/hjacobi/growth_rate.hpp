#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hjacobi/errors.hpp"
#include "hjacobi/invariant.hpp"
#include "hjacobi/params.hpp"
#include "hjacobi/portfolio.hpp"
#include "hjacobi/quadrature.hpp"
#include "hjacobi/stats.hpp"

namespace hjacobi {

enum class GrowthMethod { mc, quadrature };

inline const char* to_string(GrowthMethod m) { return m == GrowthMethod::mc ? "mc" : "quadrature"; }

struct GrowthBudget {
  std::size_t draws = 1000000;
  std::uint64_t seed = 0;
  QbOptions quadrature;
};

struct GrowthRateEstimate {
  double lambda_hat = 0.0;
  double se = 0.0;
  GrowthMethod method = GrowthMethod::mc;
  std::vector<Margin> condition_margins;  // ā_k − 1 for k = 2..N+1, ok iff > 0
};

/// ā_k > 1 for k = 2..N+1, the strict condition for a finite robust growth rate.
inline std::vector<Margin> strict_growth_margins(const ModelParams& p, std::size_t N) {
  detail::check_open_size(N, p.dim());
  const auto abar = tail_sums(p.a);
  std::vector<Margin> out;
  for (std::size_t k = 2; k <= N + 1; ++k) out.push_back({k, abar[k - 1] - 1.0, abar[k - 1] > 1.0});
  return out;
}

/// Σ_{k<=N} a_k²/y_k + ā²_{N+1}/ȳ_{N+1} at a ranked state.
inline double robust_integrand(std::span<const double> y, const std::vector<double>& a, std::size_t N,
                               double tail) {
  double s = 0.0, ybar = 0.0;
  for (std::size_t k = 0; k < N; ++k) s += a[k] * a[k] / y[k];
  for (std::size_t k = N; k < y.size(); ++k) ybar += y[k];
  return s + tail * tail / ybar;
}

/// λ̂ = (σ²/8) ∫ (Σ_{k<=N} a_k²/y_k + ā²_{N+1}/ȳ_{N+1}) q dy − (σ²/8) ā_1² for rank Jacobi parameters.
inline GrowthRateEstimate robust_growth_rate(const ModelParams& p, std::size_t N, GrowthMethod method,
                                             const GrowthBudget& budget = {}) {
  if (!p.rank_only()) throw ValidationError("robust growth rate needs gamma = 0");
  require_valid(p);
  GrowthRateEstimate est;
  est.method = method;
  est.condition_margins = strict_growth_margins(p, N);
  for (const auto& m : est.condition_margins)
    if (!m.ok)
      throw GrowthConditionError("robust growth rate needs tail sum > 1 at k=" + std::to_string(m.k), m.k);
  const std::size_t d = p.dim();
  const auto abar = tail_sums(p.a);
  const double tail = abar[N];
  const double scale = p.sigma * p.sigma / 8.0;
  const double shift = scale * abar[0] * abar[0];
  if (method == GrowthMethod::mc) {
    const auto spec = InvariantSpec::for_params(p);
    RunningStats acc;
    const auto diag = for_each_invariant_draw(spec, budget.draws, budget.seed, Frame::ranked,
                                              [&](std::span<const double> y) {
                                                acc.add(robust_integrand(y, p.a, N, tail));
                                              });
    if (!diag.ok) throw NumericalError("invariant sampler failed: " + diag.note);
    est.lambda_hat = scale * acc.mean() - shift;
    est.se = scale * acc.stderr_mean();
    return est;
  }
  if (d > 3) throw ValidationError("quadrature growth rate is limited to d <= 3");
  const auto norm = qb_quadrature(p.a, 1.0, 0.0, budget.quadrature);
  std::vector<std::vector<double>> hints;
  for (std::size_t k = 0; k <= N; ++k) {
    hints.push_back(p.a);
    hints.back()[k] -= 1.0;
  }
  const auto integral = integrate_ordered(
      [&](std::span<const double> y) { return robust_integrand(y, p.a, N, tail); }, p.a, hints, budget.quadrature);
  if (!integral.converged || norm.depth_exhausted) throw NumericalError("growth-rate quadrature did not converge");
  const double mean = integral.value / norm.value;
  est.lambda_hat = scale * mean - shift;
  est.se = scale * (integral.error / norm.value + std::abs(mean) * norm.error / norm.value);
  return est;
}

}  // namespace hjacobi
