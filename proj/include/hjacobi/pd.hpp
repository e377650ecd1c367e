#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "hjacobi/errors.hpp"
#include "hjacobi/parallel.hpp"
#include "hjacobi/rng.hpp"
#include "hjacobi/stats.hpp"

namespace hjacobi {

/// Poisson–Dirichlet limit parameters with an optional tilt on the top N atoms.
struct PDConfig {
  double theta = 1.0;
  std::vector<double> tilt;  // a_1..a_N
  std::size_t M = 10000;
  /// Stick breaking stops once the unbroken mass falls below this.
  double tail_cutoff = 1e-300;

  std::size_t open_size() const { return tilt.size(); }

  void check() const {
    if (!(theta > 0.0) || !std::isfinite(theta)) throw ValidationError("theta must be positive");
    if (M < 10) throw ValidationError("truncation length M must be at least 10");
    // expected unbroken mass after M sticks is (θ/(1+θ))^M
    if (static_cast<double>(M) * std::log(theta / (1.0 + theta)) > std::log(1e-6))
      throw ValidationError("truncation length M too small: expected tail mass exceeds 1e-6; enlarge M");
    double s = 0.0;
    for (std::size_t k = tilt.size(); k-- > 1;) {
      s += tilt[k];
      if (!(s > -theta)) throw ValidationError("tilt condition sum_{l>=k} a_l > -theta fails", k + 1);
    }
  }
};

/// Draws from PD(θ) by GEM stick breaking with Beta(1, θ) sticks.
class GemSampler {
 public:
  GemSampler(double theta, std::size_t M, double cutoff = 1e-300)
      : inv_theta_(1.0 / theta), M_(M), cutoff_(cutoff) {}

  /// Fills atoms (decreasing if `sorted`) and returns the unbroken tail mass.
  double draw(Philox4x32& rng, std::vector<double>& atoms, bool sorted = true) const {
    atoms.clear();
    double rest = 1.0;
    for (std::size_t k = 0; k < M_ && rest >= cutoff_; ++k) {
      const double keep = std::pow(rng.uniform_open(), inv_theta_);
      atoms.push_back(rest * (1.0 - keep));
      rest *= keep;
    }
    if (sorted) std::sort(atoms.begin(), atoms.end(), std::greater<>());
    return rest;
  }

 private:
  double inv_theta_;
  std::size_t M_;
  double cutoff_;
};

/// Streams n PD(θ) draws to fn(atoms, tail); draw i uses Philox stream i.
template <class F>
void for_each_pd_draw(const PDConfig& cfg, std::size_t n, std::uint64_t seed, F&& fn, bool sorted = true) {
  cfg.check();
  const GemSampler gem(cfg.theta, cfg.M, cfg.tail_cutoff);
  std::vector<double> atoms;
  atoms.reserve(256);
  Philox4x32 rng;
  for (std::size_t i = 0; i < n; ++i) {
    rng.reseed(seed, i);
    const double tail = gem.draw(rng, atoms, sorted);
    fn(std::span<const double>(atoms), tail);
  }
}

struct PdDraw {
  std::vector<double> atoms;  // non-increasing
  double tail = 0.0;
};

inline std::vector<PdDraw> pd_sample(double theta, std::size_t M, std::size_t n, std::uint64_t seed,
                                     double tail_cutoff = 1e-300) {
  PDConfig cfg{theta, {}, M, tail_cutoff};
  std::vector<PdDraw> out;
  out.reserve(n);
  for_each_pd_draw(cfg, n, seed, [&](std::span<const double> a, double tail) {
    out.push_back({std::vector<double>(a.begin(), a.end()), tail});
  });
  return out;
}

/// φ_m(y) = Σ_k y_k^m, with φ_1 ≡ 1.
inline double phi_m(std::span<const double> y, double m) {
  if (m == 1.0) return 1.0;
  if (!(m > 1.0)) throw ValidationError("phi_m needs m >= 1");
  double s = 0.0;
  const double r = std::round(m);
  if (r == m && m <= 16.0) {
    const int k = static_cast<int>(r);
    for (double v : y) {
      double p = v;
      for (int j = 1; j < k; ++j) p *= v;
      s += p;
    }
    return s;
  }
  for (double v : y) s += std::pow(v, m);
  return s;
}

/// E_θ[∏ φ_{m_i}] by the polynomial recursion, memoized on sorted multisets.
/// Safe for concurrent use; the cache is filled under a lock.
class MomentRecursion {
 public:
  explicit MomentRecursion(double theta) : theta_(theta) {
    if (!(theta > 0.0)) throw ValidationError("theta must be positive");
  }

  double expect(std::vector<int> m) const {
    for (int v : m)
      if (v < 1) throw ValidationError("moment orders must be positive integers");
    m.erase(std::remove(m.begin(), m.end(), 1), m.end());
    std::sort(m.begin(), m.end());
    return eval(m);
  }

  double theta() const { return theta_; }

 private:
  double eval(const std::vector<int>& m) const {
    if (m.empty()) return 1.0;
    {
      std::shared_lock lock(mutex_);
      const auto it = cache_.find(m);
      if (it != cache_.end()) return it->second;
    }
    const std::size_t K = m.size();
    double total = 0;
    for (int v : m) total += v;
    double rhs = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
      std::vector<int> next = m;
      next[i] -= 1;
      rhs += static_cast<double>(m[i]) * (m[i] - 1) * eval(canonical(std::move(next)));
    }
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j) {
        if (i == j) continue;
        std::vector<int> next;
        for (std::size_t k = 0; k < K; ++k)
          if (k != i && k != j) next.push_back(m[k]);
        next.push_back(m[i] + m[j] - 1);
        rhs += static_cast<double>(m[i]) * m[j] * eval(canonical(std::move(next)));
      }
    const double value = rhs / (total * (total + theta_ - 1.0));
    std::unique_lock lock(mutex_);
    cache_.emplace(m, value);
    return value;
  }

  static std::vector<int> canonical(std::vector<int> m) {
    m.erase(std::remove(m.begin(), m.end(), 1), m.end());
    std::sort(m.begin(), m.end());
    return m;
  }

  double theta_;
  mutable std::shared_mutex mutex_;
  mutable std::map<std::vector<int>, double> cache_;
};

inline double moment_recursion(double theta, const std::vector<int>& multiset) {
  for (int v : multiset)
    if (v < 2) throw ValidationError("multiset entries must be >= 2");
  return MomentRecursion(theta).expect(multiset);
}

/// All multisets of integers >= 2 with total at most `max_total`, in increasing order.
inline std::vector<std::vector<int>> multisets_up_to(int max_total) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  std::function<void(int, int)> rec = [&](int min_part, int left) {
    if (!cur.empty()) out.push_back(cur);
    for (int v = min_part; v <= left; ++v) {
      cur.push_back(v);
      rec(v, left - v);
      cur.pop_back();
    }
  };
  rec(2, max_total);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    const int sa = std::accumulate(a.begin(), a.end(), 0), sb = std::accumulate(b.begin(), b.end(), 0);
    return sa != sb ? sa < sb : a < b;
  });
  return out;
}

inline std::string multiset_id(const std::vector<int>& m) {
  std::string s = "{";
  for (std::size_t i = 0; i < m.size(); ++i) s += (i ? "," : "") + std::to_string(m[i]);
  return s + "}";
}

/// Test function on a point of the Kingman simplex (atoms non-increasing).
struct KingmanFunction {
  std::string id;
  std::function<double(std::span<const double>)> f;
};

inline KingmanFunction phi_function(double m) {
  return {"phi_" + std::to_string(static_cast<int>(m)), [m](std::span<const double> y) { return phi_m(y, m); }};
}

inline KingmanFunction top_atom(std::size_t k) {
  return {"Y_" + std::to_string(k), [k](std::span<const double> y) { return y.size() >= k ? y[k - 1] : 0.0; }};
}

struct TiltedEstimate {
  double value = 0.0;
  double se = 0.0;
  double ess = 0.0;
  std::size_t n = 0;
};

inline constexpr double kEssFloorFraction = 0.05;

/// log ∏_{k<=N} y_k^{a_k} over sorted atoms (missing atoms count as 0).
inline double log_tilt(std::span<const double> y, const std::vector<double>& a) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] == 0.0) continue;
    const double v = k < y.size() ? y[k] : 0.0;
    s += a[k] * std::log(v);
  }
  return s;
}

/// Self-normalized importance-sampling estimates of several functions under the tilted limit.
inline std::vector<TiltedEstimate> tilted_expect_many(const PDConfig& cfg, const std::vector<KingmanFunction>& fs,
                                                      std::size_t n, std::uint64_t seed) {
  std::vector<double> logw;
  std::vector<std::vector<double>> vals(fs.size());
  logw.reserve(n);
  for (auto& v : vals) v.reserve(n);
  for_each_pd_draw(cfg, n, seed, [&](std::span<const double> y, double) {
    logw.push_back(log_tilt(y, cfg.tilt));
    for (std::size_t j = 0; j < fs.size(); ++j) vals[j].push_back(fs[j].f(y));
  });
  const double top = *std::max_element(logw.begin(), logw.end());
  std::vector<double> w(n);
  double sw = 0.0, sw2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::exp(logw[i] - top);
    sw += w[i];
    sw2 += w[i] * w[i];
  }
  const double ess = sw * sw / sw2;
  if (ess < kEssFloorFraction * static_cast<double>(n))
    throw NumericalError("importance-sampling ESS " + std::to_string(ess) +
                         " below 5% of n; the tilt is too heavy for this sample size");
  std::vector<TiltedEstimate> out;
  for (std::size_t j = 0; j < fs.size(); ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += w[i] * vals[j][i];
    mu /= sw;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = w[i] * (vals[j][i] - mu);
      var += r * r;
    }
    out.push_back({mu, std::sqrt(var) / sw, ess, n});
  }
  return out;
}

inline TiltedEstimate tilted_expect(const PDConfig& cfg, const KingmanFunction& f, std::size_t n,
                                    std::uint64_t seed) {
  return tilted_expect_many(cfg, {f}, n, seed).front();
}

}  // namespace hjacobi
