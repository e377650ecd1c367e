#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "hjacobi/errors.hpp"
#include "hjacobi/sde.hpp"
#include "hjacobi/simplex.hpp"

namespace hjacobi {

/// Cumulative Σ ΔX_i ΔX_j along the path (1-based names), starting at 0.
inline std::vector<double> realized_covariation(const SimPath& path, std::size_t i, std::size_t j) {
  detail::check_index(i, path.dim(), "name");
  detail::check_index(j, path.dim(), "name");
  std::vector<double> out(path.size(), 0.0);
  for (std::size_t n = 1; n < path.size(); ++n) {
    const auto a = path.row(n - 1);
    const auto b = path.row(n);
    out[n] = out[n - 1] + (b[i - 1] - a[i - 1]) * (b[j - 1] - a[j - 1]);
  }
  return out;
}

/// Cumulative left-point Riemann sum of c_ij(X_t) dt.
inline std::vector<double> model_covariation(const SimPath& path, std::size_t i, std::size_t j) {
  detail::check_index(i, path.dim(), "name");
  detail::check_index(j, path.dim(), "name");
  const double s2 = path.params.sigma * path.params.sigma;
  std::vector<double> out(path.size(), 0.0);
  for (std::size_t n = 1; n < path.size(); ++n) {
    const auto x = path.row(n - 1);
    const double dt = path.times[n] - path.times[n - 1];
    out[n] = out[n - 1] + s2 * x[i - 1] * ((i == j ? 1.0 : 0.0) - x[j - 1]) * dt;
  }
  return out;
}

struct OccupationReport {
  double eps = 0.0;
  std::size_t samples = 0;
  std::vector<double> gap_fraction;  // [k-1]: X_(k) − X_(k+1) < eps
  double any_gap_fraction = 0.0;     // some adjacent gap < eps
  double bottom_fraction = 0.0;      // X_(d) < eps
  double triple_fraction = 0.0;      // X_(k) − X_(k+2) < eps for some k
};

/// Streaming grid-occupation counts for a ladder of bandwidths.
class OccupationAccumulator {
 public:
  OccupationAccumulator(std::size_t d, std::vector<double> eps_ladder)
      : d_(d), eps_(std::move(eps_ladder)), gap_(eps_.size(), std::vector<std::size_t>(d - 1, 0)),
        any_(eps_.size(), 0), bottom_(eps_.size(), 0), triple_(eps_.size(), 0), names_(d), y_(d) {
    for (double e : eps_)
      if (!(e > 0.0)) throw ValidationError("occupation bandwidth must be positive");
  }

  void add(std::span<const double> x) {
    rank_order(x, names_);
    for (std::size_t k = 0; k < d_; ++k) y_[k] = x[names_[k]];
    ++samples_;
    double min_gap = 1.0;
    for (std::size_t k = 0; k + 1 < d_; ++k) min_gap = std::min(min_gap, y_[k] - y_[k + 1]);
    double min_triple = 1.0;
    for (std::size_t k = 0; k + 2 < d_; ++k) min_triple = std::min(min_triple, y_[k] - y_[k + 2]);
    for (std::size_t e = 0; e < eps_.size(); ++e) {
      const double eps = eps_[e];
      for (std::size_t k = 0; k + 1 < d_; ++k)
        if (y_[k] - y_[k + 1] < eps) ++gap_[e][k];
      if (min_gap < eps) ++any_[e];
      if (y_[d_ - 1] < eps) ++bottom_[e];
      if (d_ >= 3 && min_triple < eps) ++triple_[e];
    }
  }

  void operator()(double, std::span<const double> prev, std::span<const double>) { add(prev); }

  void merge(const OccupationAccumulator& o) {
    samples_ += o.samples_;
    for (std::size_t e = 0; e < eps_.size(); ++e) {
      for (std::size_t k = 0; k + 1 < d_; ++k) gap_[e][k] += o.gap_[e][k];
      any_[e] += o.any_[e];
      bottom_[e] += o.bottom_[e];
      triple_[e] += o.triple_[e];
    }
  }

  std::vector<OccupationReport> reports() const {
    std::vector<OccupationReport> out;
    const double n = samples_ ? static_cast<double>(samples_) : 1.0;
    for (std::size_t e = 0; e < eps_.size(); ++e) {
      OccupationReport r;
      r.eps = eps_[e];
      r.samples = samples_;
      for (std::size_t k = 0; k + 1 < d_; ++k) r.gap_fraction.push_back(gap_[e][k] / n);
      r.any_gap_fraction = any_[e] / n;
      r.bottom_fraction = bottom_[e] / n;
      r.triple_fraction = triple_[e] / n;
      out.push_back(r);
    }
    return out;
  }

 private:
  std::size_t d_;
  std::vector<double> eps_;
  std::vector<std::vector<std::size_t>> gap_;
  std::vector<std::size_t> any_, bottom_, triple_;
  std::size_t samples_ = 0;
  std::vector<std::size_t> names_;
  std::vector<double> y_;
};

/// Fractions of stored grid states with small gaps, small bottom weight, or near-triple collisions.
inline OccupationReport occupation_stats(const SimPath& path, double eps) {
  OccupationAccumulator acc(path.dim(), {eps});
  for (std::size_t n = 0; n < path.size(); ++n) acc.add(path.row(n));
  return acc.reports().front();
}

inline double default_local_time_bandwidth(double dt) { return 2.0 * std::sqrt(dt); }

/// Occupation-density estimate of the local time at 0 of the ranked gap
/// X_(k) − X_(l): (1/ε) Σ 1{0 <= gap < ε} (Δgap)².
class GapLocalTime {
 public:
  GapLocalTime(std::size_t d, std::size_t k, std::size_t l, double eps)
      : k_(k - 1), l_(l - 1), eps_(eps), names_(d), y_prev_(d), y_next_(d) {
    if (k < 1 || l <= k || l > d) throw ValidationError("gap ranks must satisfy 1 <= k < l <= d", k);
    if (!(eps > 0.0)) throw ValidationError("local-time bandwidth must be positive");
  }

  /// Increment for one step.
  double increment(std::span<const double> prev, std::span<const double> next) {
    rank_values(prev, y_prev_);
    rank_values(next, y_next_);
    const double g0 = y_prev_[k_] - y_prev_[l_];
    if (g0 >= eps_) return 0.0;
    const double dg = (y_next_[k_] - y_next_[l_]) - g0;
    return dg * dg / eps_;
  }

  void operator()(double, std::span<const double> prev, std::span<const double> next) {
    total_ += increment(prev, next);
  }

  double total() const { return total_; }

 private:
  void rank_values(std::span<const double> x, std::vector<double>& y) {
    rank_order(x, names_);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = x[names_[k]];
  }

  std::size_t k_, l_;
  double eps_;
  std::vector<std::size_t> names_;
  std::vector<double> y_prev_, y_next_;
  double total_ = 0.0;
};

/// Cumulative local-time estimate L_{k,l}(t) along the stored path; l defaults to k+1
/// and the bandwidth to 2√dt.
inline std::vector<double> gap_local_time(const SimPath& path, std::size_t k, std::optional<std::size_t> l = {},
                                          std::optional<double> eps = {}) {
  GapLocalTime lt(path.dim(), k, l.value_or(k + 1), eps.value_or(default_local_time_bandwidth(path.dt)));
  std::vector<double> out(path.size(), 0.0);
  for (std::size_t n = 1; n < path.size(); ++n) out[n] = out[n - 1] + lt.increment(path.row(n - 1), path.row(n));
  return out;
}

}  // namespace hjacobi
