#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hjacobi/errors.hpp"
#include "hjacobi/params.hpp"
#include "hjacobi/quadrature.hpp"
#include "hjacobi/rng.hpp"
#include "hjacobi/simplex.hpp"
#include "hjacobi/stats.hpp"

namespace hjacobi {

namespace detail {

/// Σ e_k log v_k with the 0·log 0 = 0 convention; +inf signals a pole.
inline double log_power_product(std::span<const double> v, std::span<const double> e) {
  double s = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (e[k] == 0.0) continue;
    if (v[k] <= 0.0) {
      if (e[k] < 0.0) return std::numeric_limits<double>::infinity();
      return -std::numeric_limits<double>::infinity();
    }
    s += e[k] * std::log(v[k]);
  }
  return s;
}

inline std::size_t factorial(std::size_t d) {
  std::size_t f = 1;
  for (std::size_t i = 2; i <= d; ++i) f *= i;
  return f;
}

}  // namespace detail

inline constexpr std::size_t kMaxNormalizerDim = 6;
inline constexpr std::size_t kMaxPermutationDim = 9;

/// Unnormalized p(x) = ∏_k x_(k)^{a_k + γ_{n_k(x)} − 1}.
inline double density_p_unnormalized(std::span<const double> x, const ModelParams& p) {
  const std::size_t d = p.dim();
  if (x.size() != d) throw ValidationError("density_p: dimension mismatch");
  const auto names = rank_order(x);
  std::vector<double> y(d), e(d);
  for (std::size_t k = 0; k < d; ++k) {
    y[k] = x[names[k]];
    e[k] = p.a[k] + p.gamma[names[k]] - 1.0;
  }
  const double lp = detail::log_power_product(y, e);
  if (lp == std::numeric_limits<double>::infinity()) throw DomainError("density_p: pole at a boundary point");
  return std::exp(lp);
}

struct Normalizer {
  double value = 0.0;
  double error = 0.0;
  bool diverged = false;
  bool converged = true;
};

/// Z = Σ_τ Q_{a+γ_τ}(1, 0) over assignments τ of names to ranks. Repeated γ
/// values share one quadrature scaled by the multiplicity.
inline Normalizer normalizer_Z(const ModelParams& p, const QbOptions& opts = {}) {
  Normalizer z;
  if (!validate_params(p).valid) {
    z.diverged = true;
    z.value = std::numeric_limits<double>::infinity();
    return z;
  }
  const std::size_t d = p.dim();
  if (d > kMaxNormalizerDim)
    throw ValidationError("normalizer by permutation sum is limited to d <= 6; use a self-normalized estimate");
  std::vector<double> g = p.gamma;
  std::sort(g.begin(), g.end());
  std::size_t multiplicity = 1;
  for (std::size_t i = 0; i < d;) {
    std::size_t j = i;
    while (j < d && g[j] == g[i]) ++j;
    multiplicity *= detail::factorial(j - i);
    i = j;
  }
  std::vector<double> b(d);
  do {
    for (std::size_t k = 0; k < d; ++k) b[k] = p.a[k] + g[k];
    const auto q = qb_quadrature(b, 1.0, 0.0, opts);
    z.value += static_cast<double>(multiplicity) * q.value;
    z.error += static_cast<double>(multiplicity) * q.error;
    z.converged = z.converged && !q.depth_exhausted;
  } while (std::next_permutation(g.begin(), g.end()));
  return z;
}

inline double density_p(const SimplexVec& x, const ModelParams& p, bool normalized = false,
                        std::optional<double> Z = std::nullopt) {
  const double u = density_p_unnormalized(x.values(), p);
  if (!normalized) return u;
  const double z = Z ? *Z : normalizer_Z(p).value;
  return u / z;
}

/// Ranked density: Σ over assignments of names to ranks of p at the named
/// state, so that it integrates to 1 over the ordered simplex.
inline double density_q_unnormalized(std::span<const double> y, const ModelParams& p) {
  const std::size_t d = p.dim();
  if (y.size() != d) throw ValidationError("density_q: dimension mismatch");
  for (std::size_t k = 1; k < d; ++k)
    if (y[k] > y[k - 1]) throw ValidationError("density_q expects a ranked vector", k + 1);
  if (p.rank_only()) {
    std::vector<double> e(d);
    for (std::size_t k = 0; k < d; ++k) e[k] = p.a[k] - 1.0;
    const double lp = detail::log_power_product(y, e);
    if (lp == std::numeric_limits<double>::infinity()) throw DomainError("density_q: pole at a boundary point");
    return static_cast<double>(detail::factorial(d)) * std::exp(lp);
  }
  if (d > kMaxPermutationDim) throw ValidationError("density_q permutation sum is limited to d <= 9");
  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<double> e(d);
  double total = 0.0;
  do {
    for (std::size_t k = 0; k < d; ++k) e[k] = p.a[k] + p.gamma[perm[k]] - 1.0;
    const double lp = detail::log_power_product(y, e);
    if (lp == std::numeric_limits<double>::infinity()) throw DomainError("density_q: pole at a boundary point");
    total += std::exp(lp);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return total;
}

inline double density_q(const RankedVec& y, const ModelParams& p, bool normalized = false,
                        std::optional<double> Z = std::nullopt) {
  const double u = density_q_unnormalized(y.values(), p);
  if (!normalized) return u;
  const double z = Z ? *Z : normalizer_Z(p).value;
  return u / z;
}

enum class SamplerKind { exact_dirichlet, exponential_spacing, mcmc };

inline const char* to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::exact_dirichlet: return "exact-dirichlet";
    case SamplerKind::exponential_spacing: return "exponential-spacing-rejection";
    case SamplerKind::mcmc: return "mcmc";
  }
  return "?";
}

struct InvariantSpec {
  ModelParams params;
  std::optional<double> Z;
  SamplerKind kind = SamplerKind::mcmc;

  /// Routes a=0 to Dirichlet, γ=0 to the spacing sampler, anything else to MCMC.
  static InvariantSpec for_params(const ModelParams& p) {
    require_valid(p);
    InvariantSpec s;
    s.params = p;
    if (p.name_only())
      s.kind = SamplerKind::exact_dirichlet;
    else if (p.rank_only())
      s.kind = SamplerKind::exponential_spacing;
    else
      s.kind = SamplerKind::mcmc;
    return s;
  }

  void check() const {
    require_valid(params);
    if (kind == SamplerKind::exact_dirichlet && !params.name_only())
      throw ValidationError("Dirichlet sampler needs a = 0");
    if (kind == SamplerKind::exponential_spacing && !params.rank_only())
      throw ValidationError("spacing sampler needs gamma = 0");
    if (Z && !(*Z > 0.0)) throw ValidationError("cached normalizer must be positive");
  }
};

struct SamplerOptions {
  /// Rejection acceptance below this rate is reported as a failure.
  double acceptance_floor = 1e-3;
  std::size_t mcmc_burn_in = 10000;
  std::size_t mcmc_pilot = 4000;
};

struct SamplerDiagnostics {
  SamplerKind kind = SamplerKind::mcmc;
  std::size_t draws = 0;
  std::size_t proposals = 0;
  double acceptance_rate = 1.0;
  double ess = 0.0;
  std::size_t thinning = 1;
  bool ok = true;
  std::string note;
};

enum class Frame { named, ranked };

/// Gamma(shape) variate, Marsaglia–Tsang; returns the log to survive tiny shapes.
inline double log_gamma_variate(Philox4x32& rng, NormalSource& normal, double shape) {
  double boost = 0.0;
  if (shape < 1.0) {
    boost = std::log(rng.uniform_open()) / shape;
    shape += 1.0;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double z, v;
    do {
      z = normal(rng);
      v = 1.0 + c * z;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_open();
    if (std::log(u) < 0.5 * z * z + d - d * v + d * std::log(v)) return std::log(d * v) + boost;
  }
}

namespace detail {

inline void normalize_from_logs(std::span<const double> logs, std::span<double> out) {
  const double top = *std::max_element(logs.begin(), logs.end());
  double s = 0.0;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    out[i] = std::exp(logs[i] - top);
    s += out[i];
  }
  for (double& v : out) v /= s;
}

inline void shuffle_into_names(Philox4x32& rng, std::span<const double> y, std::span<double> x,
                               std::vector<std::size_t>& perm) {
  const std::size_t d = y.size();
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = d; i-- > 1;) {
    const auto j = static_cast<std::size_t>(rng.uniform_open() * static_cast<double>(i + 1));
    std::swap(perm[i], perm[std::min(j, i)]);
  }
  for (std::size_t k = 0; k < d; ++k) x[perm[k]] = y[k];
}

inline void sort_desc(std::span<double> v) { std::sort(v.begin(), v.end(), std::greater<>()); }

}  // namespace detail

/// Ranked draws from q for γ = 0: log-gaps z_k ~ Exp(ā_k), k = 2..d, then
/// acceptance y_1^{ā_1}/B. Calls fn(y) per accepted draw.
template <class F>
SamplerDiagnostics sample_spacing(const ModelParams& p, std::size_t n, Philox4x32& rng, F&& fn,
                                  const SamplerOptions& opts = {}) {
  const std::size_t d = p.dim();
  const auto abar = tail_sums(p.a);
  for (std::size_t k = 1; k < d; ++k)
    if (!(abar[k] > 0.0)) throw ValidationError("spacing sampler needs positive tail sums", k + 1);
  const double a1 = abar[0];
  // log of the acceptance bound B
  const double log_bound = a1 >= 0.0 ? 0.0 : a1 * std::log(1.0 / static_cast<double>(d));
  SamplerDiagnostics diag;
  diag.kind = SamplerKind::exponential_spacing;
  std::vector<double> y(d);
  const std::size_t max_proposals = static_cast<std::size_t>(static_cast<double>(n) / opts.acceptance_floor) + 1000;
  while (diag.draws < n) {
    double log_w = 0.0;
    double sum = 1.0;
    y[0] = 1.0;
    for (std::size_t k = 1; k < d; ++k) {
      log_w -= exponential(rng, abar[k]);
      y[k] = std::exp(log_w);
      sum += y[k];
    }
    ++diag.proposals;
    const double log_accept = -a1 * std::log(sum) - log_bound;
    if (log_accept >= 0.0 || std::log(rng.uniform_open()) < log_accept) {
      for (double& v : y) v /= sum;
      fn(std::span<const double>(y));
      ++diag.draws;
    } else if (diag.proposals > max_proposals) {
      diag.ok = false;
      diag.note = "acceptance rate below floor";
      break;
    }
  }
  diag.acceptance_rate = static_cast<double>(diag.draws) / static_cast<double>(std::max<std::size_t>(1, diag.proposals));
  diag.ess = static_cast<double>(diag.draws);
  if (diag.proposals >= 1000 && diag.acceptance_rate < opts.acceptance_floor) {
    diag.ok = false;
    diag.note = "acceptance rate below floor";
  }
  return diag;
}

/// Named Dirichlet(γ) draws.
template <class F>
SamplerDiagnostics sample_dirichlet(const std::vector<double>& gamma, std::size_t n, Philox4x32& rng, F&& fn) {
  const std::size_t d = gamma.size();
  for (std::size_t i = 0; i < d; ++i)
    if (!(gamma[i] > 0.0)) throw ValidationError("Dirichlet sampler needs positive gamma", i + 1);
  NormalSource normal;
  std::vector<double> logs(d), x(d);
  SamplerDiagnostics diag;
  diag.kind = SamplerKind::exact_dirichlet;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < d; ++i) logs[i] = log_gamma_variate(rng, normal, gamma[i]);
    detail::normalize_from_logs(logs, x);
    fn(std::span<const double>(x));
  }
  diag.draws = diag.proposals = n;
  diag.ess = static_cast<double>(n);
  return diag;
}

/// Random-walk Metropolis on (rank-to-name assignment, log-gaps) targeting the
/// hybrid density. Emits named states.
template <class F>
SamplerDiagnostics sample_mcmc(const ModelParams& p, std::size_t n, Philox4x32& rng, F&& fn,
                               const SamplerOptions& opts = {}) {
  require_valid(p);
  const std::size_t d = p.dim();
  NormalSource normal;
  std::vector<std::size_t> assign(d);  // assign[k] = name at rank k
  std::iota(assign.begin(), assign.end(), std::size_t{0});
  std::vector<double> z(d, 0.0), step(d, 0.5), tails(d), y(d), x(d);
  auto log_target = [&](std::span<const double> zz, std::span<const std::size_t> as) {
    double s = 0.0;
    for (std::size_t k = d; k-- > 0;) {
      s += p.a[k] + p.gamma[as[k]];
      tails[k] = s;
    }
    double log_w = 0.0, sum = 1.0, lt = 0.0;
    for (std::size_t k = 1; k < d; ++k) {
      log_w -= zz[k];
      sum += std::exp(log_w);
      lt -= tails[k] * zz[k];
    }
    return lt - tails[0] * std::log(sum);
  };
  for (std::size_t k = 1; k < d; ++k) z[k] = 0.1;
  double cur = log_target(z, assign);
  std::vector<std::size_t> tried(d, 0), accepted(d, 0);
  std::size_t total_moves = 0, total_accepted = 0;

  auto sweep = [&](bool adapt) {
    for (std::size_t k = 1; k < d; ++k) {
      const double old = z[k];
      z[k] = std::abs(old + step[k] * normal(rng));
      const double prop = log_target(z, assign);
      ++tried[k];
      ++total_moves;
      if (std::log(rng.uniform_open()) < prop - cur) {
        cur = prop;
        ++accepted[k];
        ++total_accepted;
        if (adapt) step[k] *= 1.02;
      } else {
        z[k] = old;
        if (adapt) step[k] *= 0.985;
      }
    }
    if (d >= 2) {
      const auto i = static_cast<std::size_t>(rng.uniform_open() * static_cast<double>(d));
      auto j = static_cast<std::size_t>(rng.uniform_open() * static_cast<double>(d - 1));
      if (j >= i) ++j;
      std::swap(assign[i], assign[j]);
      const double prop = log_target(z, assign);
      ++total_moves;
      if (std::log(rng.uniform_open()) < prop - cur) {
        cur = prop;
        ++total_accepted;
      } else {
        std::swap(assign[i], assign[j]);
      }
    }
  };
  auto current_state = [&] {
    double log_w = 0.0, sum = 1.0;
    y[0] = 1.0;
    for (std::size_t k = 1; k < d; ++k) {
      log_w -= z[k];
      y[k] = std::exp(log_w);
      sum += y[k];
    }
    for (std::size_t k = 0; k < d; ++k) x[assign[k]] = y[k] / sum;
  };

  for (std::size_t it = 0; it < opts.mcmc_burn_in; ++it) sweep(true);
  std::vector<double> pilot;
  pilot.reserve(opts.mcmc_pilot);
  for (std::size_t it = 0; it < opts.mcmc_pilot; ++it) {
    sweep(false);
    current_state();
    pilot.push_back(*std::max_element(x.begin(), x.end()));
  }
  const double pilot_ess = effective_sample_size(pilot);
  const std::size_t thin =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(2.0 * static_cast<double>(pilot.size()) / pilot_ess)));

  SamplerDiagnostics diag;
  diag.kind = SamplerKind::mcmc;
  diag.thinning = thin;
  std::vector<double> trace;
  trace.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = 0; t < thin; ++t) sweep(false);
    current_state();
    trace.push_back(*std::max_element(x.begin(), x.end()));
    fn(std::span<const double>(x));
  }
  diag.draws = n;
  diag.proposals = total_moves;
  diag.acceptance_rate = static_cast<double>(total_accepted) / static_cast<double>(std::max<std::size_t>(1, total_moves));
  diag.ess = effective_sample_size(trace);
  if (diag.ess < 0.5 * static_cast<double>(n)) {
    diag.ok = false;
    diag.note = "effective sample size below half the requested draws";
  }
  return diag;
}

/// Streams n invariant draws in the requested frame to fn(state).
template <class F>
SamplerDiagnostics for_each_invariant_draw(const InvariantSpec& spec, std::size_t n, std::uint64_t seed, Frame frame,
                                           F&& fn, const SamplerOptions& opts = {}) {
  spec.check();
  const std::size_t d = spec.params.dim();
  Philox4x32 rng(seed, 0);
  Philox4x32 perm_rng(seed, 1);
  std::vector<double> buf(d);
  std::vector<std::size_t> perm(d);
  switch (spec.kind) {
    case SamplerKind::exact_dirichlet:
      return sample_dirichlet(spec.params.gamma, n, rng, [&](std::span<const double> x) {
        if (frame == Frame::named) return fn(x);
        std::copy(x.begin(), x.end(), buf.begin());
        detail::sort_desc(buf);
        fn(std::span<const double>(buf));
      });
    case SamplerKind::exponential_spacing:
      return sample_spacing(
          spec.params, n, rng,
          [&](std::span<const double> y) {
            if (frame == Frame::ranked) return fn(y);
            detail::shuffle_into_names(perm_rng, y, buf, perm);
            fn(std::span<const double>(buf));
          },
          opts);
    case SamplerKind::mcmc:
      return sample_mcmc(
          spec.params, n, rng,
          [&](std::span<const double> x) {
            if (frame == Frame::named) return fn(x);
            std::copy(x.begin(), x.end(), buf.begin());
            detail::sort_desc(buf);
            fn(std::span<const double>(buf));
          },
          opts);
  }
  return {};
}

struct InvariantSample {
  std::vector<std::vector<double>> draws;
  Frame frame = Frame::named;
  SamplerDiagnostics diagnostics;
};

inline InvariantSample sample_invariant(const InvariantSpec& spec, std::size_t n, std::uint64_t seed,
                                        Frame frame = Frame::named, const SamplerOptions& opts = {}) {
  if (n < 1) throw ValidationError("need at least one draw");
  InvariantSample out;
  out.frame = frame;
  out.draws.reserve(n);
  out.diagnostics = for_each_invariant_draw(
      spec, n, seed, frame, [&](std::span<const double> v) { out.draws.emplace_back(v.begin(), v.end()); }, opts);
  return out;
}

}  // namespace hjacobi
