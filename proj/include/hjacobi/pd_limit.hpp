#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hjacobi/errors.hpp"
#include "hjacobi/invariant.hpp"
#include "hjacobi/params.hpp"
#include "hjacobi/pd.hpp"
#include "hjacobi/rng.hpp"
#include "hjacobi/stats.hpp"

namespace hjacobi {

enum class TailShape { flat, geometric };

inline const char* to_string(TailShape s) { return s == TailShape::flat ? "flat" : "geometric"; }

struct ScheduleCheck {
  std::size_t d = 0;
  bool tail_sums_positive = false;  // ā^d_k > 0 for k >= 2
  bool head_matches = false;        // a^d_k = a_k for k <= N
  bool tail_mass_matches = false;   // ā^d_{N+1} = θ
  double max_tail_entry = 0.0;
};

/// Parameter vectors a^d sharing a fixed head a_1..a_N and a tail of total mass θ.
struct ScheduleAd {
  double theta = 1.0;
  std::vector<double> head;
  std::vector<std::size_t> dims;
  TailShape shape = TailShape::flat;
  /// Geometric tails use ratio exp(−decay/(d−N)) so the largest entry still vanishes.
  double decay = 5.0;

  std::size_t open_size() const { return head.size(); }

  std::vector<double> vector_for(std::size_t d) const {
    const std::size_t N = head.size();
    if (d <= N) throw ValidationError("schedule dimension must exceed N", d);
    const std::size_t m = d - N;
    std::vector<double> a(head);
    a.reserve(d);
    if (shape == TailShape::flat) {
      a.insert(a.end(), m, theta / static_cast<double>(m));
      return a;
    }
    const double r = std::exp(-decay / static_cast<double>(m));
    const double first = theta * (1.0 - r) / (1.0 - std::pow(r, static_cast<double>(m)));
    double w = first;
    for (std::size_t j = 0; j < m; ++j, w *= r) a.push_back(w);
    return a;
  }

  ModelParams params_for(std::size_t d, double sigma = 1.0) const {
    return ModelParams::rank_jacobi(vector_for(d), sigma);
  }

  std::vector<ScheduleCheck> checks() const {
    std::vector<ScheduleCheck> out;
    const std::size_t N = head.size();
    for (std::size_t d : dims) {
      const auto a = vector_for(d);
      const auto abar = tail_sums(a);
      ScheduleCheck c;
      c.d = d;
      c.tail_sums_positive = true;
      for (std::size_t k = 2; k <= d; ++k) c.tail_sums_positive = c.tail_sums_positive && abar[k - 1] > 0.0;
      c.head_matches = std::equal(head.begin(), head.end(), a.begin());
      c.tail_mass_matches = std::abs(abar[N] - theta) <= 1e-12 * std::max(1.0, theta);
      for (std::size_t k = N; k < d; ++k) c.max_tail_entry = std::max(c.max_tail_entry, std::abs(a[k]));
      out.push_back(c);
    }
    return out;
  }

  /// Every per-d item holds and the largest tail entry strictly shrinks along the ladder.
  bool valid() const {
    const auto cs = checks();
    for (std::size_t i = 0; i < cs.size(); ++i) {
      if (!cs[i].tail_sums_positive || !cs[i].head_matches || !cs[i].tail_mass_matches) return false;
      if (i > 0 && !(cs[i].max_tail_entry < cs[i - 1].max_tail_entry)) return false;
    }
    return true;
  }
};

/// Σ_{l=k}^N a_l > −θ for k = 2..N.
inline void check_tilt_condition(double theta, const std::vector<double>& a) {
  double s = 0.0;
  for (std::size_t k = a.size(); k-- > 1;) {
    s += a[k];
    if (!(s > -theta)) throw ValidationError("tilt condition sum_{l>=k} a_l > -theta fails", k + 1);
  }
}

inline ScheduleAd make_schedule(double theta, std::vector<double> head, std::vector<std::size_t> dims,
                                TailShape shape = TailShape::flat, double decay = 5.0) {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw ValidationError("theta must be positive");
  if (dims.empty()) throw ValidationError("schedule needs at least one dimension");
  if (!(decay > 0.0)) throw ValidationError("geometric decay must be positive");
  check_tilt_condition(theta, head);
  std::sort(dims.begin(), dims.end());
  dims.erase(std::unique(dims.begin(), dims.end()), dims.end());
  for (std::size_t d : dims)
    if (d <= head.size() + 1) throw ValidationError("schedule dimension must exceed N+1", d);
  ScheduleAd s{theta, std::move(head), std::move(dims), shape, decay};
  if (!s.valid()) throw ValidationError("schedule violates its limit conditions");
  return s;
}

/// A test function together with its limit value when that is known in closed form.
struct LimitTest {
  KingmanFunction f;
  std::optional<double> exact_limit;
};

struct ConvergenceRow {
  std::size_t d = 0;
  std::string function_id;
  double estimate = 0.0;
  double se = 0.0;
  double tilted_limit = 0.0;
  double limit_se = 0.0;
  double gap = 0.0;
};

struct ConvergenceVerdict {
  std::string function_id;
  bool gaps_decrease = false;
  bool final_within_noise = false;
  bool pass = false;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  std::vector<ConvergenceVerdict> verdicts;
  bool pass() const {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.pass; });
  }
};

/// Compares E_{a^d}[f] along the schedule with the tilted limit.
inline ConvergenceReport convergence_experiment(const ScheduleAd& schedule, const PDConfig& cfg,
                                                const std::vector<LimitTest>& tests, std::size_t n,
                                                std::uint64_t seed, std::size_t limit_draws = 0) {
  if (tests.empty()) throw ValidationError("need at least one test function");
  if (n < 2) throw ValidationError("need at least two draws per dimension");
  if (cfg.theta != schedule.theta || cfg.tilt != schedule.head)
    throw ValidationError("PD configuration does not match the schedule limit");
  std::vector<double> limit(tests.size()), limit_se(tests.size(), 0.0);
  std::vector<KingmanFunction> mc_fs;
  std::vector<std::size_t> mc_idx;
  for (std::size_t j = 0; j < tests.size(); ++j) {
    if (tests[j].exact_limit) {
      limit[j] = *tests[j].exact_limit;
    } else {
      mc_fs.push_back(tests[j].f);
      mc_idx.push_back(j);
    }
  }
  if (!mc_fs.empty()) {
    const auto est = tilted_expect_many(cfg, mc_fs, limit_draws ? limit_draws : n, derive_seed(seed, 0));
    for (std::size_t i = 0; i < mc_idx.size(); ++i) {
      limit[mc_idx[i]] = est[i].value;
      limit_se[mc_idx[i]] = est[i].se;
    }
  }
  ConvergenceReport rep;
  for (std::size_t d : schedule.dims) {
    const auto spec = InvariantSpec::for_params(schedule.params_for(d));
    std::vector<RunningStats> acc(tests.size());
    const auto diag = for_each_invariant_draw(spec, n, derive_seed(seed, d), Frame::ranked,
                                              [&](std::span<const double> y) {
                                                for (std::size_t j = 0; j < tests.size(); ++j)
                                                  acc[j].add(tests[j].f.f(y));
                                              });
    if (!diag.ok) throw NumericalError("invariant sampler failed at d=" + std::to_string(d) + ": " + diag.note);
    for (std::size_t j = 0; j < tests.size(); ++j) {
      ConvergenceRow row;
      row.d = d;
      row.function_id = tests[j].f.id;
      row.estimate = acc[j].mean();
      row.se = acc[j].stderr_mean();
      row.tilted_limit = limit[j];
      row.limit_se = limit_se[j];
      row.gap = std::abs(row.estimate - row.tilted_limit);
      rep.rows.push_back(row);
    }
  }
  const std::size_t nf = tests.size();
  for (std::size_t j = 0; j < nf; ++j) {
    ConvergenceVerdict v;
    v.function_id = tests[j].f.id;
    v.gaps_decrease = true;
    for (std::size_t i = 1; i < schedule.dims.size(); ++i)
      v.gaps_decrease = v.gaps_decrease && rep.rows[i * nf + j].gap < rep.rows[(i - 1) * nf + j].gap;
    const auto& last = rep.rows[(schedule.dims.size() - 1) * nf + j];
    v.final_within_noise = last.gap < 3.0 * std::hypot(last.se, last.limit_se);
    v.pass = v.gaps_decrease && v.final_within_noise;
    rep.verdicts.push_back(v);
  }
  return rep;
}

/// θ > 1 and θ + Σ_{l=k}^N a_l > 1 for k = 2..N.
inline std::vector<Margin> limit_growth_margins(const PDConfig& cfg) {
  std::vector<Margin> out;
  out.push_back({cfg.tilt.size() + 1, cfg.theta - 1.0, cfg.theta > 1.0});
  double s = cfg.theta;
  for (std::size_t k = cfg.tilt.size(); k-- > 1;) {
    s += cfg.tilt[k];
    out.push_back({k + 1, s - 1.0, s > 1.0});
  }
  std::reverse(out.begin(), out.end());
  return out;
}

struct LimitGrowthEstimate {
  double value = 0.0;
  double se = 0.0;
  double ess = 0.0;
  std::vector<Margin> condition_margins;
};

/// (σ²/8) E_tilted[Σ_{k<=N} a_k²/Y_k + θ²/Ȳ_{N+1}] − (σ²/8)(Σa_k + θ)².
inline LimitGrowthEstimate limit_growth_rate(const PDConfig& cfg, double sigma, std::size_t n, std::uint64_t seed) {
  cfg.check();
  if (cfg.tilt.empty()) throw ValidationError("limit growth rate needs N >= 1");
  if (!(sigma > 0.0)) throw ValidationError("sigma must be positive");
  LimitGrowthEstimate out;
  out.condition_margins = limit_growth_margins(cfg);
  for (const auto& m : out.condition_margins)
    if (!m.ok) throw GrowthConditionError("limit growth condition fails at k=" + std::to_string(m.k), m.k);
  const std::size_t N = cfg.tilt.size();
  const double theta = cfg.theta;
  const auto& a = cfg.tilt;
  KingmanFunction integrand{"robust_integrand", [&](std::span<const double> y) {
                              double s = 0.0, ybar = 0.0;
                              for (std::size_t k = 0; k < N; ++k)
                                if (a[k] != 0.0) s += a[k] * a[k] / y[k];
                              for (std::size_t k = N; k < y.size(); ++k) ybar += y[k];
                              return s + theta * theta / ybar;
                            }};
  const auto est = tilted_expect(cfg, integrand, n, seed);
  double total = theta;
  for (double v : a) total += v;
  const double scale = sigma * sigma / 8.0;
  out.value = scale * (est.value - total * total);
  out.se = scale * est.se;
  out.ess = est.ess;
  return out;
}

}  // namespace hjacobi
