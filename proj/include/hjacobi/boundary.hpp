#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hjacobi/ergodic.hpp"
#include "hjacobi/errors.hpp"
#include "hjacobi/params.hpp"
#include "hjacobi/sde.hpp"
#include "hjacobi/simplex.hpp"
#include "hjacobi/stats.hpp"

namespace hjacobi {

enum class BoundaryKind { rank_hits, rank_pushed_only, nameset_hits, nameset_pushed_only };

inline const char* to_string(BoundaryKind k) {
  switch (k) {
    case BoundaryKind::rank_hits: return "rank_hits";
    case BoundaryKind::rank_pushed_only: return "rank_pushed_only";
    case BoundaryKind::nameset_hits: return "nameset_hits";
    case BoundaryKind::nameset_pushed_only: return "nameset_pushed_only";
  }
  return "?";
}

struct BoundaryQuery {
  BoundaryKind kind = BoundaryKind::rank_hits;
  std::size_t rank = 2;  // rank queries
  IndexSet names;        // name-set queries
  ModelParams params;

  bool is_rank() const { return kind == BoundaryKind::rank_hits || kind == BoundaryKind::rank_pushed_only; }

  void check() const {
    const std::size_t d = params.dim();
    if (is_rank()) {
      if (rank < 2 || rank > d) throw ValidationError("rank query needs 2 <= k <= d", rank);
    } else {
      if (names.empty() || names.size() > d - 1) throw ValidationError("name-set query needs 1 <= |I| <= d-1");
      for (std::size_t i : names)
        if (i > d) throw ValidationError("name-set index exceeds dimension", i);
    }
  }
};

struct BoundaryVerdict {
  bool holds = false;  // avoids zero, or is pushed-only, depending on the query
  std::vector<Margin> margins;
};

/// P(X_(k) hits 0) = 0 iff ā_l + γ̄_(l) >= 1 for every l = 2..k.
inline BoundaryVerdict rank_avoids_zero_report(const ModelParams& p, std::size_t k) {
  if (k < 2 || k > p.dim()) throw ValidationError("rank must satisfy 2 <= k <= d", k);
  const auto s = combined_tail_sums(p);
  BoundaryVerdict v;
  v.holds = true;
  for (std::size_t l = 2; l <= k; ++l) {
    v.margins.push_back({l, s[l - 1], s[l - 1] >= 1.0});
    v.holds = v.holds && s[l - 1] >= 1.0;
  }
  return v;
}

inline bool rank_avoids_zero(const ModelParams& p, std::size_t k) { return rank_avoids_zero_report(p, k).holds; }

/// ā_k + γ̄_(k) >= 1: X_(k) reaches 0 only together with X_(k−1).
inline bool rank_pushed_only(const ModelParams& p, std::size_t k) {
  if (k < 2 || k > p.dim()) throw ValidationError("rank must satisfy 2 <= k <= d", k);
  return combined_tail_sums(p)[k - 1] >= 1.0;
}

namespace detail {

/// ā_l + Σ_{i∈I} γ_i + Σ_{k=l}^{d−N} γ^{−I}_(k) for l = 2..d−N+1.
inline std::vector<Margin> nameset_margins(const ModelParams& p, const IndexSet& set) {
  const std::size_t d = p.dim();
  const std::size_t n = set.size();
  if (n < 1 || n > d - 1) throw ValidationError("name set needs 1 <= |I| <= d-1");
  for (std::size_t i : set)
    if (i > d) throw ValidationError("name-set index exceeds dimension", i);
  double inside = 0.0;
  std::vector<double> outside;
  for (std::size_t i = 1; i <= d; ++i) {
    if (set.contains(i))
      inside += p.gamma[i - 1];
    else
      outside.push_back(p.gamma[i - 1]);
  }
  std::sort(outside.begin(), outside.end(), std::greater<>());
  const auto abar = tail_sums(p.a);
  std::vector<Margin> out;
  for (std::size_t l = 2; l <= d - n + 1; ++l) {
    double s = abar[l - 1] + inside;
    for (std::size_t k = l; k <= d - n; ++k) s += outside[k - 1];
    out.push_back({l, s, s >= 1.0});
  }
  return out;
}

}  // namespace detail

inline BoundaryVerdict nameset_avoids_zero_report(const ModelParams& p, const IndexSet& set) {
  BoundaryVerdict v;
  v.margins = detail::nameset_margins(p, set);
  v.holds = std::all_of(v.margins.begin(), v.margins.end(), [](const Margin& m) { return m.ok; });
  return v;
}

inline bool nameset_avoids_zero(const ModelParams& p, const IndexSet& set) {
  return nameset_avoids_zero_report(p, set).holds;
}

/// ā_{d−N+1} + Σ_{i∈I} γ_i >= 1: Λ_I reaches 0 only when a strictly larger set does.
inline bool nameset_pushed_only(const ModelParams& p, const IndexSet& set) {
  return detail::nameset_margins(p, set).back().ok;
}

inline BoundaryVerdict analytic_verdict(const BoundaryQuery& q) {
  q.check();
  switch (q.kind) {
    case BoundaryKind::rank_hits: return rank_avoids_zero_report(q.params, q.rank);
    case BoundaryKind::rank_pushed_only: {
      const auto s = combined_tail_sums(q.params);
      const double v = s[q.rank - 1];
      return {v >= 1.0, {{q.rank, v, v >= 1.0}}};
    }
    case BoundaryKind::nameset_hits: return nameset_avoids_zero_report(q.params, q.names);
    case BoundaryKind::nameset_pushed_only: {
      const auto m = detail::nameset_margins(q.params, q.names).back();
      return {m.ok, {m}};
    }
  }
  return {};
}

struct HitFrequencyRow {
  double eps = 0.0;
  std::size_t hits = 0;
  std::size_t paths = 0;
  double frequency = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct HitFrequencyReport {
  std::vector<HitFrequencyRow> rows;
  SchemeStats scheme;
  bool under_resolved() const { return scheme.under_resolved(); }
};

struct HitExperiment {
  double T = 50.0;
  double dt = 1e-3;
  std::size_t paths = 500;
  std::vector<double> eps_ladder = {1e-2, 1e-3, 1e-4};
  std::optional<std::vector<double>> x0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  /// Pushed-only queries count a dip only while the partner stays above this multiple of eps.
  double separation_factor = 10.0;
};

namespace detail {

/// Tracks, per eps, whether the queried quantity dipped below eps on the grid.
class DipTracker {
 public:
  DipTracker(const BoundaryQuery& q, const std::vector<double>& eps, double sep)
      : q_(&q), eps_(&eps), sep_(sep), hit_(eps.size(), false), names_(q.params.dim()) {}

  void observe(std::span<const double> x) {
    double value, partner = 1.0;
    if (q_->is_rank()) {
      rank_order(x, names_);
      value = x[names_[q_->rank - 1]];
      partner = x[names_[q_->rank - 2]];
    } else {
      value = lambda_sum(x, q_->names);
      partner = 1.0;
      for (std::size_t i = 0; i < x.size(); ++i)
        if (!q_->names.contains(i + 1)) partner = std::min(partner, x[i]);
    }
    const bool pushed = q_->kind == BoundaryKind::rank_pushed_only || q_->kind == BoundaryKind::nameset_pushed_only;
    for (std::size_t e = 0; e < eps_->size(); ++e) {
      const double eps = (*eps_)[e];
      if (value < eps && (!pushed || partner >= sep_ * eps)) hit_[e] = true;
    }
  }

  void operator()(double, std::span<const double>, std::span<const double> next) { observe(next); }

  const std::vector<bool>& hits() const { return hit_; }

 private:
  const BoundaryQuery* q_;
  const std::vector<double>* eps_;
  double sep_;
  std::vector<bool> hit_;
  std::vector<std::size_t> names_;
};

}  // namespace detail

/// Fraction of simulated paths whose queried quantity dips below each eps before T.
inline HitFrequencyReport mc_hit_frequency(const BoundaryQuery& q, const HitExperiment& cfg) {
  q.check();
  if (cfg.paths < 1) throw ValidationError("need at least one path");
  const SimplexVec x0 = cfg.x0 ? SimplexVec(*cfg.x0) : SimplexVec::uniform(q.params.dim());
  auto [trackers, scheme] = run_paths(q.params, x0, cfg.T, cfg.dt, cfg.seed, cfg.paths, cfg.threads, [&](std::size_t) {
    detail::DipTracker t(q, cfg.eps_ladder, cfg.separation_factor);
    t.observe(x0.values());
    return t;
  });
  HitFrequencyReport r;
  r.scheme = scheme;
  for (std::size_t e = 0; e < cfg.eps_ladder.size(); ++e) {
    HitFrequencyRow row;
    row.eps = cfg.eps_ladder[e];
    row.paths = cfg.paths;
    for (const auto& t : trackers)
      if (t.hits()[e]) ++row.hits;
    row.frequency = static_cast<double>(row.hits) / static_cast<double>(cfg.paths);
    std::tie(row.ci_lo, row.ci_hi) = wilson_interval(row.hits, cfg.paths);
    r.rows.push_back(row);
  }
  return r;
}

}  // namespace hjacobi
