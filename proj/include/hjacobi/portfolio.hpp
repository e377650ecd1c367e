#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hjacobi/errors.hpp"
#include "hjacobi/params.hpp"
#include "hjacobi/sde.hpp"
#include "hjacobi/simplex.hpp"

namespace hjacobi {

/// Ranked weights with the 1-based names holding each rank.
struct RankedState {
  std::vector<double> y;
  std::vector<std::size_t> names;  // names[k-1] = name at rank k

  static RankedState of(std::span<const double> x) {
    RankedState r;
    const auto order = rank_order(x);
    r.y.resize(x.size());
    r.names.resize(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      r.y[k] = x[order[k]];
      r.names[k] = order[k] + 1;
    }
    return r;
  }

  static RankedState of(const SimplexVec& x) { return of(x.values()); }

  std::size_t dim() const { return y.size(); }
};

/// Borrowed ranked view used inside loops; names are 0-based here.
struct RankedView {
  std::span<const double> y;
  std::span<const std::size_t> names0;
  std::size_t name(std::size_t k) const { return names0[k - 1] + 1; }
};

namespace detail {

inline void check_open_size(std::size_t N, std::size_t d) {
  if (N < 1 || N >= d) throw ValidationError("open market size must satisfy 1 <= N < d", N);
}

inline std::vector<std::size_t> zero_based(const std::vector<std::size_t>& names) {
  std::vector<std::size_t> out(names.size());
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] < 1 || names[k] > names.size()) throw ValidationError("name out of range", names[k]);
    out[k] = names[k] - 1;
  }
  return out;
}

/// θ_{n_k} = h_k 1{k<=N} + 1 − h^T x_()^N.
inline void expand_open_into(std::span<const double> h, std::span<const double> y, std::span<const std::size_t> names0,
                             std::span<double> theta) {
  double hx = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) hx += h[k] * y[k];
  const double base = 1.0 - hx;
  for (std::size_t k = 0; k < y.size(); ++k) theta[names0[k]] = base + (k < h.size() ? h[k] : 0.0);
}

/// ā_{N+1} + Σ_{l>N} γ_{n_l} and X̄_(N+1), 0-based N.
inline std::pair<double, double> open_tail(std::span<const double> y, std::span<const std::size_t> names0,
                                           const ModelParams& p, std::size_t N) {
  double num = 0.0, den = 0.0;
  for (std::size_t l = N; l < y.size(); ++l) {
    num += p.a[l] + p.gamma[names0[l]];
    den += y[l];
  }
  return {num, den};
}

/// ĥ_k = (a_k + γ_{n_k})/(2y_k) − tail/(2ȳ_{N+1}); false if a denominator is below `floor`.
inline bool hat_h_into(std::span<const double> y, std::span<const std::size_t> names0, const ModelParams& p,
                       std::size_t N, std::span<double> h, double floor = 0.0) {
  const auto [num, den] = open_tail(y, names0, p, N);
  if (!(den > floor)) return false;
  const double tail = num / (2.0 * den);
  for (std::size_t k = 0; k < N; ++k) {
    if (!(y[k] > floor)) return false;
    h[k] = (p.a[k] + p.gamma[names0[k]]) / (2.0 * y[k]) - tail;
  }
  return true;
}

}  // namespace detail

inline std::vector<double> expand_open(std::span<const double> h, const SimplexVec& x) {
  detail::check_open_size(h.size(), x.dim());
  const auto names0 = rank_order(x.values());
  std::vector<double> y(x.dim());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = x[names0[k]];
  std::vector<double> theta(x.dim());
  detail::expand_open_into(h, y, names0, theta);
  return theta;
}

/// ℓ_i(x) = (γ_i + a_{r_i(x)}) / (2 x_i); solves c(x) ℓ = b(x).
inline std::vector<double> ell_field(const SimplexVec& x, const ModelParams& p) {
  const std::size_t d = p.dim();
  if (x.dim() != d) throw ValidationError("ell_field: dimension mismatch");
  const auto names0 = rank_order(x.values());
  std::vector<double> ell(d);
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t i = names0[k];
    if (!(x[i] > 0.0)) throw DomainError("ell_field undefined at a boundary state");
    ell[i] = (p.gamma[i] + p.a[k]) / (2.0 * x[i]);
  }
  return ell;
}

inline std::vector<double> hat_h(const RankedState& s, const ModelParams& p, std::size_t N) {
  detail::check_open_size(N, p.dim());
  if (s.dim() != p.dim()) throw ValidationError("hat_h: dimension mismatch");
  const auto names0 = detail::zero_based(s.names);
  std::vector<double> h(N);
  if (!detail::hat_h_into(s.y, names0, p, N, h)) throw DomainError("hat_h: zero denominator");
  return h;
}

struct GrowthReport {
  std::size_t open_size = 0;
  bool exists = false;
  std::vector<Margin> margins;  // ā_k + γ̄_(k) for k = 2..N+1, ok iff >= 1
  std::optional<std::size_t> first_violation;
};

/// Growth-optimal strategy exists in the size-N open market iff ā_k + γ̄_(k) >= 1 for k = 2..N+1.
inline GrowthReport growth_exists(const ModelParams& p, std::size_t N) {
  detail::check_open_size(N, p.dim());
  const auto v = validate_params(p, N);
  GrowthReport r;
  r.open_size = N;
  r.margins = v.growth_margins;
  r.exists = *v.growth_ok;
  for (const auto& m : r.margins)
    if (!m.ok) {
      r.first_violation = m.k;
      break;
    }
  return r;
}

inline void require_growth(const ModelParams& p, std::size_t N) {
  const auto r = growth_exists(p, N);
  if (!r.exists)
    throw GrowthConditionError("growth-optimal strategy does not exist: margin below 1 at k=" +
                                   std::to_string(*r.first_violation),
                               r.first_violation);
}

/// θ̂ indexed by rank: entry k-1 is θ̂ for the name holding rank k.
inline std::vector<double> hat_theta(const RankedState& s, const ModelParams& p, std::size_t N) {
  require_growth(p, N);
  if (s.dim() != p.dim()) throw ValidationError("hat_theta: dimension mismatch");
  const auto names0 = detail::zero_based(s.names);
  const double base = 1.0 - 0.5 * p.total_mass();
  const auto [num, den] = detail::open_tail(s.y, names0, p, N);
  if (!(den > 0.0)) throw DomainError("hat_theta: zero tail weight");
  std::vector<double> out(p.dim());
  for (std::size_t k = 0; k < p.dim(); ++k) {
    if (k < N) {
      if (!(s.y[k] > 0.0)) throw DomainError("hat_theta: zero ranked weight");
      out[k] = base + (p.a[k] + p.gamma[names0[k]]) / (2.0 * s.y[k]);
    } else {
      out[k] = base + num / (2.0 * den);
    }
  }
  return out;
}

/// θ̂ indexed by name.
inline std::vector<double> hat_theta_named(const SimplexVec& x, const ModelParams& p, std::size_t N) {
  const auto s = RankedState::of(x);
  const auto by_rank = hat_theta(s, p, N);
  std::vector<double> out(p.dim());
  for (std::size_t k = 0; k < p.dim(); ++k) out[s.names[k] - 1] = by_rank[k];
  return out;
}

/// ĥ^T κ^N ĥ in closed form.
inline double local_growth(const RankedState& s, const ModelParams& p, std::size_t N) {
  detail::check_open_size(N, p.dim());
  const auto names0 = detail::zero_based(s.names);
  const auto [num, den] = detail::open_tail(s.y, names0, p, N);
  if (!(den > 0.0)) throw DomainError("local_growth: zero tail weight");
  double acc = num * num / den;
  for (std::size_t k = 0; k < N; ++k) {
    if (!(s.y[k] > 0.0)) throw DomainError("local_growth: zero ranked weight");
    const double v = p.a[k] + p.gamma[names0[k]];
    acc += v * v / s.y[k];
  }
  const double mass = p.total_mass();
  return 0.25 * p.sigma * p.sigma * (acc - mass * mass);
}

class Generator;

/// A trading strategy in share-per-wealth form.
class StrategySpec {
 public:
  enum class Kind { raw_theta, open_h, functionally_generated };

  using RawFn = std::function<bool(double t, std::span<const double> x, std::span<double> theta)>;
  using OpenFn = std::function<bool(double t, const RankedView& s, std::span<double> h)>;

  static StrategySpec raw(std::string id, RawFn fn) {
    StrategySpec s;
    s.kind_ = Kind::raw_theta;
    s.id_ = std::move(id);
    s.raw_ = std::move(fn);
    return s;
  }

  static StrategySpec open(std::string id, std::size_t N, OpenFn fn) {
    StrategySpec s;
    s.kind_ = Kind::open_h;
    s.id_ = std::move(id);
    s.n_ = N;
    s.open_ = std::move(fn);
    return s;
  }

  static StrategySpec generated(std::shared_ptr<const Generator> g);

  static StrategySpec market() {
    return raw("market", [](double, std::span<const double>, std::span<double> theta) {
      std::fill(theta.begin(), theta.end(), 1.0);
      return true;
    });
  }

  /// Open-market portfolio of the top N: θ_{n_k} = 1{k<=N} / Σ_{k<=N} X_(k).
  static StrategySpec open_market_portfolio(std::size_t N) {
    return open("open_market_" + std::to_string(N), N, [N](double, const RankedView& s, std::span<double> h) {
      double top = 0.0;
      for (std::size_t k = 0; k < N; ++k) top += s.y[k];
      if (!(top > 0.0)) return false;
      for (std::size_t k = 0; k < N; ++k) h[k] = 1.0 / top;
      return true;
    });
  }

  /// θ̂ via ĥ; evaluation fails when X_(k), k <= N, or X̄_(N+1) is below `floor`.
  static StrategySpec growth_optimal(const ModelParams& p, std::size_t N, double floor = 1e-10) {
    require_growth(p, N);
    return open("hat_theta_N" + std::to_string(N), N,
                [p, N, floor](double, const RankedView& s, std::span<double> h) {
                  return detail::hat_h_into(s.y, s.names0, p, N, h, floor);
                });
  }

  Kind kind() const { return kind_; }
  const std::string& id() const { return id_; }
  std::size_t open_size() const { return n_; }

  /// Writes θ(x) by name; returns false if the strategy cannot be evaluated at x.
  bool evaluate(double t, std::span<const double> x, std::span<double> theta) const;

 private:
  Kind kind_ = Kind::raw_theta;
  std::string id_;
  RawFn raw_;
  std::size_t n_ = 0;
  OpenFn open_;
  std::shared_ptr<const Generator> gen_;
};

/// A generating function G for functionally generated strategies.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string id() const = 0;
  virtual double log_value(std::span<const double> x) const = 0;
  /// g_i = ∂_i log G at x, by name; false where undefined.
  virtual bool gradient(std::span<const double> x, std::span<double> g) const = 0;
  /// −½ Σ c_ij ∂_ij G / G, the smooth part of the drift Γ.
  virtual double drift_rate(std::span<const double> x, double sigma) const = 0;
  /// Coefficients of the gap local times dL̃_{k,k+1}, k = 1..d−1, entering log V
  /// with a minus sign; empty for smooth generators.
  virtual std::vector<double> local_time_weights(std::span<const double>) const { return {}; }
};

inline StrategySpec StrategySpec::generated(std::shared_ptr<const Generator> g) {
  StrategySpec s;
  s.kind_ = Kind::functionally_generated;
  s.id_ = "generated_" + g->id();
  s.gen_ = std::move(g);
  return s;
}

inline bool StrategySpec::evaluate(double t, std::span<const double> x, std::span<double> theta) const {
  switch (kind_) {
    case Kind::raw_theta: return raw_(t, x, theta);
    case Kind::open_h: {
      const std::size_t d = x.size();
      thread_local std::vector<std::size_t> names0;
      thread_local std::vector<double> y, h;
      names0.resize(d);
      y.resize(d);
      h.resize(n_);
      rank_order(x, names0);
      for (std::size_t k = 0; k < d; ++k) y[k] = x[names0[k]];
      if (!open_(t, RankedView{y, names0}, h)) return false;
      detail::expand_open_into(h, y, names0, theta);
      return true;
    }
    case Kind::functionally_generated: {
      if (!gen_->gradient(x, theta)) return false;
      double gx = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) gx += theta[i] * x[i];
      for (double& v : theta) v += 1.0 - gx;
      return true;
    }
  }
  return false;
}

}  // namespace hjacobi
