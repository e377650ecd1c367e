#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hjacobi/errors.hpp"
#include "hjacobi/portfolio.hpp"
#include "hjacobi/sde.hpp"

namespace hjacobi {

/// ito: Δlog V = θ^TΔX − ½θ^T c θ dt. compounded: Δlog V = log(1 + θ^TΔX),
/// the exact discrete wealth of a rebalanced portfolio.
enum class WealthScheme { ito, compounded };

inline const char* to_string(WealthScheme s) { return s == WealthScheme::ito ? "ito" : "compounded"; }

struct WealthOptions {
  WealthScheme scheme = WealthScheme::ito;
  /// θ^T x must equal 1 to this tolerance; larger deviations throw.
  double budget_tolerance = 1e-8;
  bool enforce_budget = true;
  bool record = true;
};

struct WealthLedger {
  std::vector<double> times;
  std::vector<double> log_v;
  std::vector<double> drift_part;
  std::vector<double> mart_part;
  std::string strategy_id;
  std::uint64_t path_id = 0;
  WealthScheme scheme = WealthScheme::ito;
  std::size_t flagged_steps = 0;
  double max_budget_error = 0.0;
};

/// Streaming log-wealth of a strategy along a path, left-point evaluation.
///
/// When the strategy cannot be evaluated the step is flagged and the previous
/// share counts are held, which per unit wealth is θ_prev / (θ_prev^T x).
class WealthAccumulator {
 public:
  WealthAccumulator(const StrategySpec& s, const ModelParams& p, double dt, WealthOptions opts = {})
      : spec_(&s), params_(p), opts_(opts), dt_(dt), theta_(p.dim()), prev_theta_(p.dim()), names_(p.dim()), b_(p.dim()) {
    ledger_.strategy_id = s.id();
    ledger_.scheme = opts.scheme;
    if (opts_.record) push(0.0);
  }

  void operator()(double t, std::span<const double> x, std::span<const double> next) {
    const std::size_t d = x.size();
    const double dt_step = dt_;
    if (!spec_->evaluate(t, x, theta_)) {
      ++ledger_.flagged_steps;
      if (have_prev_) {
        double px = 0.0;
        for (std::size_t i = 0; i < d; ++i) px += prev_theta_[i] * x[i];
        for (std::size_t i = 0; i < d; ++i) theta_[i] = prev_theta_[i] / px;
      } else {
        std::fill(theta_.begin(), theta_.end(), 1.0);
      }
    }
    double tx = 0.0, t2x = 0.0, dv = 0.0, tb = 0.0;
    rank_order(x, names_);
    drift_into(x, names_, params_, b_);
    for (std::size_t i = 0; i < d; ++i) {
      tx += theta_[i] * x[i];
      t2x += theta_[i] * theta_[i] * x[i];
      dv += theta_[i] * (next[i] - x[i]);
      tb += theta_[i] * b_[i];
    }
    const double budget = std::abs(tx - 1.0);
    ledger_.max_budget_error = std::max(ledger_.max_budget_error, budget);
    if (opts_.enforce_budget && budget > opts_.budget_tolerance)
      throw ValidationError("strategy violates the full-investment identity theta^T x = 1");
    const double s2 = params_.sigma * params_.sigma;
    const double tct = s2 * (t2x - tx * tx);
    const double drift = (tb - 0.5 * tct) * dt_step;
    const double mart = dv - tb * dt_step;
    double dlog;
    if (opts_.scheme == WealthScheme::ito) {
      dlog = dv - 0.5 * tct * dt_step;
    } else {
      if (!(1.0 + dv > 0.0)) throw NumericalError("wealth became non-positive in the compounded scheme");
      dlog = std::log1p(dv);
    }
    log_v_ += dlog;
    drift_ += drift;
    mart_ += mart;
    prev_theta_ = theta_;
    have_prev_ = true;
    if (opts_.record) push(t + dt_step);
  }

  double log_v() const { return log_v_; }
  const WealthLedger& ledger() const { return ledger_; }
  WealthLedger take_ledger() {
    finish();
    return std::move(ledger_);
  }
  std::size_t flagged_steps() const { return ledger_.flagged_steps; }
  double max_budget_error() const { return ledger_.max_budget_error; }
  std::span<const double> last_theta() const { return prev_theta_; }

 private:
  void push(double t) {
    ledger_.times.push_back(t);
    ledger_.log_v.push_back(log_v_);
    ledger_.drift_part.push_back(drift_);
    ledger_.mart_part.push_back(mart_);
  }
  void finish() {
    if (!opts_.record) {
      ledger_.times = {0.0};
      ledger_.log_v = {log_v_};
      ledger_.drift_part = {drift_};
      ledger_.mart_part = {mart_};
    }
  }

  const StrategySpec* spec_;
  ModelParams params_;
  WealthOptions opts_;
  double dt_;
  std::vector<double> theta_, prev_theta_;
  std::vector<std::size_t> names_;
  std::vector<double> b_;
  bool have_prev_ = false;
  double log_v_ = 0.0, drift_ = 0.0, mart_ = 0.0;
  WealthLedger ledger_;
};

/// Log-wealth ledger of a strategy along a stored path.
inline WealthLedger wealth(const SimPath& path, const StrategySpec& s, WealthOptions opts = {}) {
  WealthAccumulator acc(s, path.params, path.dt, opts);
  for (std::size_t n = 1; n < path.size(); ++n) acc(path.times[n - 1], path.row(n - 1), path.row(n));
  auto ledger = acc.take_ledger();
  ledger.path_id = path.stream;
  return ledger;
}

}  // namespace hjacobi
