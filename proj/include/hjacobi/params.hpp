#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hjacobi/errors.hpp"
#include "hjacobi/simplex.hpp"

namespace hjacobi {

/// Hybrid Jacobi parameters: rank drift a, name drift gamma, volatility scale sigma.
struct ModelParams {
  std::vector<double> a;
  std::vector<double> gamma;
  double sigma = 1.0;

  ModelParams() = default;
  ModelParams(std::vector<double> a_, std::vector<double> gamma_, double sigma_ = 1.0)
      : a(std::move(a_)), gamma(std::move(gamma_)), sigma(sigma_) {
    if (a.size() < 2) throw ValidationError("dimension must be at least 2");
    if (gamma.empty()) gamma.assign(a.size(), 0.0);
    if (gamma.size() != a.size()) throw ValidationError("a and gamma must have equal length");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be positive");
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!std::isfinite(a[i]) || !std::isfinite(gamma[i])) throw ValidationError("non-finite parameter", i + 1);
  }

  static ModelParams rank_jacobi(std::vector<double> a_, double sigma_ = 1.0) {
    const std::size_t d = a_.size();
    return ModelParams(std::move(a_), std::vector<double>(d, 0.0), sigma_);
  }

  static ModelParams volatility_stabilized(std::size_t d, double gamma_star, double sigma_ = 1.0) {
    return ModelParams(std::vector<double>(d, 0.0), std::vector<double>(d, gamma_star), sigma_);
  }

  std::size_t dim() const { return a.size(); }

  bool rank_only() const {
    return std::all_of(gamma.begin(), gamma.end(), [](double g) { return g == 0.0; });
  }

  bool name_only() const {
    return std::all_of(a.begin(), a.end(), [](double v) { return v == 0.0; });
  }

  /// ā_1 + γ̄_1, the total drift mass.
  double total_mass() const {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] + gamma[i];
    return s;
  }
};

/// γ sorted in decreasing order, γ_(1) >= ... >= γ_(d).
inline std::vector<double> gamma_ordered(const std::vector<double>& gamma) {
  std::vector<double> g = gamma;
  std::sort(g.begin(), g.end(), std::greater<>());
  return g;
}

/// ā_k + γ̄_(k) for k = 1..d, stored at [k-1].
inline std::vector<double> combined_tail_sums(const ModelParams& p) {
  const auto at = tail_sums(p.a);
  const auto gt = tail_sums(gamma_ordered(p.gamma));
  std::vector<double> out(at.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = at[k] + gt[k];
  return out;
}

struct Margin {
  std::size_t k = 0;  // 1-based
  double value = 0.0;
  bool ok = false;
};

struct ValidityReport {
  std::vector<Margin> margins;  // k = 2..d, ok iff value > 0
  bool valid = false;
  std::optional<std::size_t> first_violation;
  std::optional<std::size_t> open_size;
  std::vector<Margin> growth_margins;  // k = 2..N+1, ok iff value >= 1
  std::optional<bool> growth_ok;
};

/// Tail-sum validity and, when an open-market size is supplied, the growth thresholds.
inline ValidityReport validate_params(const ModelParams& p, std::optional<std::size_t> open_size = std::nullopt) {
  ValidityReport r;
  const auto s = combined_tail_sums(p);
  r.valid = true;
  for (std::size_t k = 2; k <= p.dim(); ++k) {
    Margin m{k, s[k - 1], s[k - 1] > 0.0};
    if (!m.ok && r.valid) {
      r.valid = false;
      r.first_violation = k;
    }
    r.margins.push_back(m);
  }
  if (open_size) {
    const std::size_t n = *open_size;
    if (n < 1 || n >= p.dim()) throw ValidationError("open market size must satisfy 1 <= N < d", n);
    r.open_size = n;
    bool ok = true;
    for (std::size_t k = 2; k <= n + 1; ++k) {
      Margin m{k, s[k - 1], s[k - 1] >= 1.0};
      ok = ok && m.ok;
      r.growth_margins.push_back(m);
    }
    r.growth_ok = ok;
  }
  return r;
}

inline void require_valid(const ModelParams& p) {
  const auto r = validate_params(p);
  if (!r.valid)
    throw ValidationError("tail-sum condition fails at k=" + std::to_string(*r.first_violation), r.first_violation);
}

}  // namespace hjacobi
