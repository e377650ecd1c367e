#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hjacobi/invariant.hpp"
#include "hjacobi/parallel.hpp"
#include "hjacobi/sde.hpp"
#include "hjacobi/stats.hpp"

namespace hjacobi {

/// Test function of a state, given both its named and ranked forms.
struct TestFunction {
  std::string id;
  std::function<double(std::span<const double> named, std::span<const double> ranked)> f;
};

inline TestFunction constant_one() {
  return {"one", [](auto, auto) { return 1.0; }};
}

/// y_k^power with 1-based rank k.
inline TestFunction ranked_power(std::size_t k, int power = 1) {
  std::string id = "Y_" + std::to_string(k);
  if (power != 1) id += "^" + std::to_string(power);
  return {id, [k, power](auto, std::span<const double> y) { return std::pow(y[k - 1], power); }};
}

inline TestFunction named_component(std::size_t i) {
  return {"X_" + std::to_string(i), [i](std::span<const double> x, auto) { return x[i - 1]; }};
}

/// Indicator that name i holds rank 1.
inline TestFunction leader_is(std::size_t i) {
  return {"leader_is_" + std::to_string(i), [i](std::span<const double> x, auto) {
            const double xi = x[i - 1];
            for (std::size_t j = 0; j < x.size(); ++j) {
              if (x[j] > xi) return 0.0;
              if (x[j] == xi && j < i - 1) return 0.0;
            }
            return 1.0;
          }};
}

/// Simulates n_paths paths in parallel; each gets its own observer from
/// make(path_index). Observers are returned by path index with total scheme stats.
template <class Make>
auto run_paths(const ModelParams& p, const SimplexVec& x0, double T, double dt, std::uint64_t seed,
               std::size_t n_paths, unsigned threads, Make&& make) {
  using Obs = decltype(make(std::size_t{0}));
  std::vector<std::optional<Obs>> slots(n_paths);
  std::vector<SchemeStats> stats(n_paths);
  parallel_for(n_paths, threads, [&](std::size_t i) {
    slots[i].emplace(make(i));
    stats[i] = simulate_stream(p, x0, T, dt, seed, i, *slots[i]);
  });
  std::vector<Obs> out;
  out.reserve(n_paths);
  SchemeStats total;
  for (std::size_t i = 0; i < n_paths; ++i) {
    out.push_back(std::move(*slots[i]));
    total += stats[i];
  }
  return std::pair{std::move(out), total};
}

/// Left-point time averages of a set of test functions along one path.
class TimeAverager {
 public:
  explicit TimeAverager(const std::vector<TestFunction>& tests, std::size_t d)
      : tests_(&tests), sums_(tests.size(), 0.0), names_(d), y_(d) {}

  void operator()(double, std::span<const double> prev, std::span<const double>) {
    rank_order(prev, names_);
    for (std::size_t k = 0; k < y_.size(); ++k) y_[k] = prev[names_[k]];
    for (std::size_t f = 0; f < sums_.size(); ++f) sums_[f] += (*tests_)[f].f(prev, y_);
    ++count_;
  }

  double average(std::size_t f) const { return count_ ? sums_[f] / static_cast<double>(count_) : 0.0; }

 private:
  const std::vector<TestFunction>* tests_;
  std::vector<double> sums_;
  std::vector<std::size_t> names_;
  std::vector<double> y_;
  std::size_t count_ = 0;
};

struct ErgodicSimConfig {
  double T = 100.0;
  double dt = 1e-3;
  std::size_t paths = 4;
  std::optional<std::vector<double>> x0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct ErgodicSamplerConfig {
  std::size_t n = 100000;
  std::uint64_t seed = 0;
  SamplerOptions options;
};

struct ErgodicRow {
  std::string function_id;
  Estimate time_avg;
  Estimate invariant_avg;
  double z_score = 0.0;
  bool pass = false;
};

struct ErgodicReport {
  std::vector<ErgodicRow> rows;
  bool pass = false;
  SchemeStats scheme;
  SamplerDiagnostics sampler;
  bool under_resolved() const { return scheme.under_resolved(); }
};

/// Invariant-law averages of test functions with standard errors (ESS-based for MCMC).
inline std::vector<Estimate> invariant_averages(const InvariantSpec& spec, const std::vector<TestFunction>& tests,
                                                const ErgodicSamplerConfig& cfg, SamplerDiagnostics* diag_out = nullptr) {
  const std::size_t d = spec.params.dim();
  std::vector<RunningStats> acc(tests.size());
  std::vector<double> y(d);
  const auto diag = for_each_invariant_draw(
      spec, cfg.n, cfg.seed, Frame::named,
      [&](std::span<const double> x) {
        std::copy(x.begin(), x.end(), y.begin());
        detail::sort_desc(y);
        for (std::size_t f = 0; f < tests.size(); ++f) acc[f].add(tests[f].f(x, y));
      },
      cfg.options);
  if (diag_out) *diag_out = diag;
  if (!diag.ok) throw NumericalError("invariant sampler diagnostics failed: " + diag.note);
  const double inflate = diag.ess > 0.0 ? std::sqrt(static_cast<double>(diag.draws) / diag.ess) : 1.0;
  std::vector<Estimate> out;
  for (const auto& a : acc) out.push_back({a.mean(), a.stderr_mean() * std::max(1.0, inflate)});
  return out;
}

/// Pooled path time averages against invariant-sampler averages.
inline ErgodicReport ergodic_compare(const ModelParams& p, const std::vector<TestFunction>& tests,
                                     const ErgodicSimConfig& sim, const ErgodicSamplerConfig& sampler) {
  require_valid(p);
  if (sim.paths < 2) throw ValidationError("ergodic comparison needs at least 2 paths");
  const std::size_t d = p.dim();
  const SimplexVec x0 = sim.x0 ? SimplexVec(*sim.x0) : SimplexVec::uniform(d);
  auto [averagers, scheme] = run_paths(p, x0, sim.T, sim.dt, sim.seed, sim.paths, sim.threads,
                                       [&](std::size_t) { return TimeAverager(tests, d); });
  ErgodicReport report;
  report.scheme = scheme;
  const auto inv = invariant_averages(InvariantSpec::for_params(p), tests, sampler, &report.sampler);
  report.pass = true;
  for (std::size_t f = 0; f < tests.size(); ++f) {
    RunningStats across;
    for (const auto& a : averagers) across.add(a.average(f));
    ErgodicRow row;
    row.function_id = tests[f].id;
    row.time_avg = {across.mean(), across.stderr_mean()};
    row.invariant_avg = inv[f];
    row.z_score = z_score(row.time_avg, row.invariant_avg);
    row.pass = std::abs(row.z_score) < 3.0;
    report.pass = report.pass && row.pass;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace hjacobi
