#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hjacobi/errors.hpp"
#include "hjacobi/path_stats.hpp"
#include "hjacobi/portfolio.hpp"
#include "hjacobi/wealth.hpp"

namespace hjacobi {

/// G ≡ 1.
class ConstantGenerator final : public Generator {
 public:
  std::string id() const override { return "constant"; }
  double log_value(std::span<const double>) const override { return 0.0; }
  bool gradient(std::span<const double>, std::span<double> g) const override {
    std::fill(g.begin(), g.end(), 0.0);
    return true;
  }
  double drift_rate(std::span<const double>, double) const override { return 0.0; }
};

/// G(x) = exp(c^T x).
class ExpLinearGenerator final : public Generator {
 public:
  explicit ExpLinearGenerator(std::vector<double> c) : c_(std::move(c)) {}

  std::string id() const override { return "exp_linear"; }
  double log_value(std::span<const double> x) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += c_[i] * x[i];
    return s;
  }
  bool gradient(std::span<const double>, std::span<double> g) const override {
    std::copy(c_.begin(), c_.end(), g.begin());
    return true;
  }
  double drift_rate(std::span<const double> x, double sigma) const override {
    return -0.5 * c_quadratic(x, sigma, c_, c_);
  }
  const std::vector<double>& coefficients() const { return c_; }

 private:
  std::vector<double> c_;
};

/// Ĝ(x) = F(x_()) with F(y) = ȳ_{N+1}^{ā_{N+1}/2} ∏_{k<=N} y_k^{a_k/2}, rank Jacobi only.
class RankGrowthGenerator final : public Generator {
 public:
  RankGrowthGenerator(std::vector<double> a, std::size_t N) : a_(std::move(a)), n_(N) {
    detail::check_open_size(N, a_.size());
    tail_ = 0.0;
    for (std::size_t l = N; l < a_.size(); ++l) tail_ += a_[l];
  }

  std::string id() const override { return "rank_growth_N" + std::to_string(n_); }

  double log_value(std::span<const double> x) const override {
    const auto w = ranked(x);
    double s = 0.5 * tail_ * std::log(w.ybar);
    for (std::size_t k = 0; k < n_; ++k) s += 0.5 * a_[k] * std::log(w.y[k]);
    return s;
  }

  bool gradient(std::span<const double> x, std::span<double> g) const override {
    const auto w = ranked(x);
    if (!w.ok) return false;
    for (std::size_t k = 0; k < x.size(); ++k) g[w.names[k]] = w.u[k];
    return true;
  }

  /// −½ Σ κ_kl ∂_kl F / F with ∂_kl F / F = H_kl + u_k u_l, H the Hessian of log F.
  double drift_rate(std::span<const double> x, double sigma) const override {
    const auto w = ranked(x);
    if (!w.ok) return 0.0;
    const std::size_t d = x.size();
    double uy = 0.0, u2y = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      uy += w.u[k] * w.y[k];
      u2y += w.u[k] * w.u[k] * w.y[k];
    }
    // H is diagonal on the top block and constant −ā/(2ȳ²) on the tail block.
    double h_diag = 0.0, h_full = 0.0;
    for (std::size_t k = 0; k < n_; ++k) {
      const double hk = -0.5 * a_[k] / (w.y[k] * w.y[k]);
      h_diag += hk * w.y[k];
      h_full += hk * w.y[k] * w.y[k];
    }
    const double ht = -0.5 * tail_ / (w.ybar * w.ybar);
    h_diag += ht * w.ybar;
    h_full += ht * w.ybar * w.ybar;
    const double s2 = sigma * sigma;
    return -0.5 * s2 * ((h_diag - h_full) + (u2y - uy * uy));
  }

  /// ¼(u_k − u_{k+1}) for each adjacent gap, u = ∇ log F.
  std::vector<double> local_time_weights(std::span<const double> x) const override {
    const auto w = ranked(x);
    std::vector<double> out(x.size() - 1, 0.0);
    if (!w.ok) return out;
    for (std::size_t k = 0; k + 1 < x.size(); ++k) out[k] = 0.25 * (w.u[k] - w.u[k + 1]);
    return out;
  }

 private:
  struct Work {
    std::vector<std::size_t> names;
    std::vector<double> y, u;
    double ybar = 0.0;
    bool ok = false;
  };

  Work ranked(std::span<const double> x) const {
    Work w;
    const std::size_t d = x.size();
    w.names.resize(d);
    w.y.resize(d);
    w.u.resize(d);
    rank_order(x, w.names);
    for (std::size_t k = 0; k < d; ++k) w.y[k] = x[w.names[k]];
    for (std::size_t l = n_; l < d; ++l) w.ybar += w.y[l];
    if (!(w.ybar > 0.0)) return w;
    for (std::size_t k = 0; k < n_; ++k) {
      if (!(w.y[k] > 0.0)) return w;
      w.u[k] = 0.5 * a_[k] / w.y[k];
    }
    for (std::size_t k = n_; k < d; ++k) w.u[k] = 0.5 * tail_ / w.ybar;
    w.ok = true;
    return w;
  }

  std::vector<double> a_;
  std::size_t n_;
  double tail_ = 0.0;
};

struct MasterFormulaResult {
  std::vector<double> theta;  // row-major, one row of d per left endpoint
  WealthLedger ledger;
  std::vector<double> log_g;              // log G(X_t) − log G(X_0)
  std::vector<double> gamma;              // Γ(t), smooth part minus local-time part
  std::vector<double> local_time_part;    // Σ_k ∫ w_k dL_{k,k+1}
  std::vector<double> identity_error;     // log V − (Δ log G + Γ)
  double sup_error = 0.0;
};

/// Wealth of the strategy generated by G along a path, with the master-formula
/// decomposition. The default compounded scheme makes log V the exact discrete
/// wealth, so the identity error measures the time-discretization gap.
inline MasterFormulaResult master_formula(std::shared_ptr<const Generator> G, const SimPath& path,
                                          WealthScheme scheme = WealthScheme::compounded,
                                          std::optional<double> local_time_eps = std::nullopt) {
  const std::size_t d = path.dim();
  const auto spec = StrategySpec::generated(G);
  WealthOptions wo;
  wo.scheme = scheme;
  MasterFormulaResult r;
  r.ledger = wealth(path, spec, wo);
  const double eps = local_time_eps.value_or(default_local_time_bandwidth(path.dt));
  std::vector<GapLocalTime> lts;
  for (std::size_t k = 1; k < d; ++k) lts.emplace_back(d, k, k + 1, eps);
  r.theta.resize((path.size() - 1) * d);
  const double g0 = G->log_value(path.row(0));
  r.log_g.assign(path.size(), 0.0);
  r.gamma.assign(path.size(), 0.0);
  r.local_time_part.assign(path.size(), 0.0);
  r.identity_error.assign(path.size(), 0.0);
  for (std::size_t n = 1; n < path.size(); ++n) {
    const auto x = path.row(n - 1);
    const auto next = path.row(n);
    if (!spec.evaluate(path.times[n - 1], x, std::span<double>(r.theta.data() + (n - 1) * d, d)))
      throw DomainError("generator not differentiable on the path");
    const double dt = path.times[n] - path.times[n - 1];
    double lt = 0.0;
    const auto w = G->local_time_weights(x);
    for (std::size_t k = 0; k < w.size(); ++k)
      if (w[k] != 0.0) lt += w[k] * lts[k].increment(x, next);
    r.local_time_part[n] = r.local_time_part[n - 1] + lt;
    r.gamma[n] = r.gamma[n - 1] + G->drift_rate(x, path.params.sigma) * dt - lt;
    r.log_g[n] = G->log_value(next) - g0;
    r.identity_error[n] = r.ledger.log_v[n] - (r.log_g[n] + r.gamma[n]);
    r.sup_error = std::max(r.sup_error, std::abs(r.identity_error[n]));
  }
  return r;
}

}  // namespace hjacobi
