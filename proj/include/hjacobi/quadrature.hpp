#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <span>
#include <vector>

#include "hjacobi/errors.hpp"
#include "hjacobi/simplex.hpp"

namespace hjacobi {

struct QuadratureOptions {
  double rel_tol = 1e-8;
  double abs_tol = 0.0;
  std::size_t max_subdivisions = 200;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t evaluations = 0;
  bool converged = true;
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926,
    0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518,
    0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780, 0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct Panel {
  double lo, hi, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk15(F& f, double lo, double hi) {
  const double c = 0.5 * (lo + hi);
  const double h = 0.5 * (hi - lo);
  const double fc = f(c);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kKronrodNodes[j];
    const double s = f(c - dx) + f(c + dx);
    kronrod += kKronrodWeights[j] * s;
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * s;
  }
  return {lo, hi, kronrod * h, std::abs((kronrod - gauss) * h)};
}

}  // namespace detail

/// Globally adaptive 15-point Gauss–Kronrod integration: the panel with the
/// largest error estimate is bisected until the summed estimate meets tolerance.
template <class F>
QuadratureResult integrate_adaptive(F&& f, double lo, double hi, const QuadratureOptions& opts = {}) {
  QuadratureResult r;
  if (hi <= lo) return r;
  std::size_t evals = 0;
  auto counted = [&](double x) {
    ++evals;
    return f(x);
  };
  std::priority_queue<detail::Panel> heap;
  heap.push(detail::gk15(counted, lo, hi));
  double total = heap.top().value;
  double err = heap.top().error;
  std::size_t splits = 0;
  auto done = [&] {
    const double target = std::max(opts.abs_tol, opts.rel_tol * std::abs(total));
    return err <= target || err <= 50.0 * std::numeric_limits<double>::epsilon() * std::abs(total);
  };
  while (!done()) {
    if (splits >= opts.max_subdivisions) {
      r.converged = false;
      break;
    }
    const detail::Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    const auto left = detail::gk15(counted, worst.lo, mid);
    const auto right = detail::gk15(counted, mid, worst.hi);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++splits;
  }
  // Re-sum to shed drift from the running updates.
  total = 0.0;
  err = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  r.value = total;
  r.error = err;
  r.evaluations = evals;
  if (!std::isfinite(total)) r.converged = false;
  return r;
}

/// Q_b(1,0) < ∞ iff every tail sum b̄_k, k >= 2, is positive.
inline bool qb_finite(std::span<const double> b) {
  double s = 0.0;
  for (std::size_t l = b.size(); l-- > 1;) {
    s += b[l];
    if (!(s > 0.0)) return false;
  }
  return true;
}

struct QbOptions {
  double rel_tol = 1e-8;
  std::size_t max_subdivisions = 200;
  /// Each nested level integrates this much tighter than its parent.
  double inner_tol_factor = 0.1;
  double min_tol = 1e-13;
};

struct QbResult {
  double value = 0.0;
  double error = 0.0;
  bool diverged = false;
  bool depth_exhausted = false;
  std::size_t evaluations = 0;
};

namespace detail {

/// Smallest tail sum of v over k = 2..m (1-based); +inf when m == 1.
inline double min_inner_tail(std::span<const double> v) {
  double s = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t l = v.size(); l-- > 1;) {
    s += v[l];
    best = std::min(best, s);
  }
  return best;
}

/// Integrates h over [beta, upper] where h(y) ~ y^{rho-1} near 0. A power
/// substitution removes the endpoint singularity when rho > 0; otherwise a
/// log map is used, which needs beta > 0.
template <class H>
QuadratureResult integrate_singular(H&& h, double beta, double upper, double rho, const QuadratureOptions& o) {
  if (rho > 0.0) {
    const double inv = 1.0 / rho;
    const double t_lo = beta > 0.0 ? std::pow(beta / upper, rho) : 0.0;
    auto g = [&](double t) {
      const double y = upper * std::pow(t, inv);
      return h(y) * (upper * inv) * std::pow(t, inv - 1.0);
    };
    return integrate_adaptive(g, t_lo, 1.0, o);
  }
  auto g = [&](double u) {
    const double y = std::exp(u);
    return h(y) * y;
  };
  return integrate_adaptive(g, std::log(beta), std::log(upper), o);
}

struct QbWork {
  QbOptions opts;
  std::size_t evaluations = 0;
  bool exhausted = false;
};

inline double qb_rec(std::span<const double> b, double alpha, double beta, double tol, QbWork& w, double* err) {
  const std::size_t m = b.size();
  double bsum = 0.0;
  for (double v : b) bsum += v;
  if (m == 1) {
    ++w.evaluations;
    return alpha >= beta ? std::pow(alpha, b[0] - 1.0) : 0.0;
  }
  const double scale = std::pow(alpha, bsum - 1.0);
  const double lo = beta / alpha;
  const double upper = 1.0 / static_cast<double>(m);
  if (lo >= upper) return 0.0;
  const auto inner = b.first(m - 1);
  double inner_sum = 0.0;
  for (double v : inner) inner_sum += v;
  const double bm = b[m - 1];
  const double inner_tol = std::max(w.opts.min_tol, tol * w.opts.inner_tol_factor);
  auto h = [&](double y) {
    const double rest = 1.0 - y;
    const double q = qb_rec(inner, 1.0, y / rest, inner_tol, w, nullptr);
    return std::pow(y, bm - 1.0) * std::pow(rest, inner_sum - 1.0) * q;
  };
  QuadratureOptions o;
  o.rel_tol = tol;
  o.max_subdivisions = w.opts.max_subdivisions;
  const auto r = integrate_singular(h, lo, upper, min_inner_tail(b), o);
  if (!r.converged) w.exhausted = true;
  if (err) *err = r.error * scale;
  return r.value * scale;
}

}  // namespace detail

/// Q_b(α, β): the integral of ∏ y_k^{b_k−1} over {y ordered, y_d >= β, Σy = α},
/// by nested one-dimensional adaptive quadrature.
inline QbResult qb_quadrature(std::span<const double> b, double alpha = 1.0, double beta = 0.0,
                              const QbOptions& opts = {}) {
  if (b.empty()) throw ValidationError("exponent vector must be nonempty");
  if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
  if (beta < 0.0) throw ValidationError("beta must be nonnegative");
  QbResult r;
  if (beta == 0.0 && !qb_finite(b)) {
    r.diverged = true;
    r.value = std::numeric_limits<double>::infinity();
    return r;
  }
  detail::QbWork w{opts};
  r.value = detail::qb_rec(b, alpha, beta, opts.rel_tol, w, &r.error);
  r.evaluations = w.evaluations;
  r.depth_exhausted = w.exhausted;
  return r;
}

inline QbResult qb_quadrature(const std::vector<double>& b, double alpha = 1.0, double beta = 0.0,
                              const QbOptions& opts = {}) {
  return qb_quadrature(std::span<const double>(b), alpha, beta, opts);
}

/// Integral over the ordered simplex of g(y) ∏ y_k^{b_k−1}.
///
/// Each entry of `singular` is an exponent vector describing one way the
/// integrand can blow up near the faces (b itself, or b shifted down where g
/// has poles); they only steer the change of variables and every one must be
/// integrable. Intended for d <= 3.
template <class G>
QuadratureResult integrate_ordered(G&& g, std::span<const double> b, const std::vector<std::vector<double>>& singular,
                                   const QbOptions& opts = {}) {
  const std::size_t d = b.size();
  std::vector<double> y(d, 0.0);
  std::vector<double> rho(d + 1, std::numeric_limits<double>::infinity());
  for (const auto& h : singular) {
    if (h.size() != d) throw ValidationError("singular exponent hint has wrong length");
    if (!qb_finite(h)) throw NumericalError("ordered-simplex integral diverges");
    for (std::size_t m = 2; m <= d; ++m)
      rho[m] = std::min(rho[m], detail::min_inner_tail(std::span<const double>(h).first(m)));
  }
  QuadratureResult total;
  total.converged = true;
  std::size_t evals = 0;

  // level m integrates y_m (1-based) over [y_{m+1}, alpha/m]
  auto rec = [&](auto& self, std::size_t m, double alpha, double beta, double tol) -> double {
    if (m == 1) {
      ++evals;
      y[0] = alpha;
      if (alpha < beta) return 0.0;
      double w = g(std::span<const double>(y));
      for (std::size_t k = 0; k < d; ++k) w *= std::pow(y[k], b[k] - 1.0);
      return w;
    }
    const double upper = alpha / static_cast<double>(m);
    if (beta >= upper) return 0.0;
    const double inner_tol = std::max(opts.min_tol, tol * opts.inner_tol_factor);
    auto h = [&](double v) {
      y[m - 1] = v;
      return self(self, m - 1, alpha - v, v, inner_tol);
    };
    QuadratureOptions o;
    o.rel_tol = tol;
    o.max_subdivisions = opts.max_subdivisions;
    const auto r = detail::integrate_singular(h, beta, upper, rho[m], o);
    if (!r.converged) total.converged = false;
    if (m == d) total.error = r.error;
    return r.value;
  };
  total.value = rec(rec, d, 1.0, 0.0, opts.rel_tol);
  total.evaluations = evals;
  return total;
}

}  // namespace hjacobi
