#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hjacobi/errors.hpp"
#include "hjacobi/parallel.hpp"
#include "hjacobi/params.hpp"
#include "hjacobi/rng.hpp"
#include "hjacobi/simplex.hpp"

namespace hjacobi {

/// b_i(x) = (σ²/2)(γ_i + a_{r_i(x)} − (ā_1 + γ̄_1) x_i), given the rank order of x.
inline void drift_into(std::span<const double> x, std::span<const std::size_t> names, const ModelParams& p,
                       std::span<double> out) {
  const double half_s2 = 0.5 * p.sigma * p.sigma;
  const double mass = p.total_mass();
  for (std::size_t k = 0; k < x.size(); ++k) {
    const std::size_t i = names[k];
    out[i] = half_s2 * (p.gamma[i] + p.a[k] - mass * x[i]);
  }
}

inline std::vector<double> drift(const SimplexVec& x, const ModelParams& p) {
  if (x.dim() != p.dim()) throw ValidationError("state and parameter dimensions differ");
  const auto names = rank_order(x.values());
  std::vector<double> b(x.dim());
  drift_into(x.values(), names, p, b);
  return b;
}

struct SchemeStats {
  std::size_t steps = 0;
  std::size_t projected_steps = 0;

  double projected_fraction() const { return steps ? static_cast<double>(projected_steps) / steps : 0.0; }
  /// More than 1% of steps needed the clip projection.
  bool under_resolved() const { return projected_fraction() > 0.01; }

  SchemeStats& operator+=(const SchemeStats& o) {
    steps += o.steps;
    projected_steps += o.projected_steps;
    return *this;
  }
};

/// Euler–Maruyama for the hybrid Jacobi SDE with √x⁺ diffusion and
/// clip-renormalize projection. Holds scratch space; one per thread.
class EulerStepper {
 public:
  EulerStepper(const ModelParams& p, double dt)
      : p_(p), dt_(dt), noise_scale_(p.sigma * std::sqrt(dt)), names_(p.dim()), drift_(p.dim()), root_(p.dim()) {
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  }

  /// Advances x in place using d standard normals; returns true if the raw
  /// Euler update left [0,1]^d and had to be clipped.
  bool advance(std::span<double> x, std::span<const double> z) {
    const std::size_t d = x.size();
    rank_order(x, names_);
    drift_into(x, names_, p_, drift_);
    double common = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      root_[j] = std::sqrt(std::max(x[j], 0.0));
      common += root_[j] * z[j];
    }
    bool clipped = false;
    double sum = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double v = x[i] + drift_[i] * dt_ + noise_scale_ * (root_[i] * z[i] - x[i] * common);
      if (v < 0.0) {
        v = 0.0;
        clipped = true;
      } else if (v > 1.0) {
        v = 1.0;
        clipped = true;
      }
      x[i] = v;
      sum += v;
    }
    for (std::size_t i = 0; i < d; ++i) x[i] /= sum;
    return clipped;
  }

  /// Rank order of the state before the most recent advance().
  std::span<const std::size_t> names() const { return names_; }
  std::span<const double> last_drift() const { return drift_; }
  double dt() const { return dt_; }

 private:
  const ModelParams& p_;
  double dt_;
  double noise_scale_;
  std::vector<std::size_t> names_;
  std::vector<double> drift_;
  std::vector<double> root_;
};

/// One Euler step from x with the given standard normals.
struct StepResult {
  SimplexVec state;
  bool clipped;
};

inline StepResult step(const SimplexVec& x, const ModelParams& p, double dt, std::span<const double> gaussians) {
  if (gaussians.size() != x.dim() || x.dim() != p.dim()) throw ValidationError("step: dimension mismatch");
  EulerStepper stepper(p, dt);
  std::vector<double> v = x.vector();
  const bool clipped = stepper.advance(v, gaussians);
  return {SimplexVec(std::move(v)), clipped};
}

/// Number of grid steps covering [0, T]: ⌈T/dt⌉, forgiving float noise in T/dt.
inline std::size_t step_count(double T, double dt) {
  if (!(T > 0.0) || !(dt > 0.0)) throw ValidationError("T and dt must be positive");
  const double r = T / dt;
  const double near = std::round(r);
  if (std::abs(r - near) <= 1e-9 * std::max(1.0, r)) return static_cast<std::size_t>(near);
  return static_cast<std::size_t>(std::ceil(r));
}

/// Streams one path to an observer called as obs(t, x_prev, x_next) for each
/// step. Returns the projection counts.
template <class Observer>
SchemeStats simulate_stream(const ModelParams& p, const SimplexVec& x0, double T, double dt, std::uint64_t seed,
                            std::uint64_t stream, Observer&& obs) {
  require_valid(p);
  if (x0.dim() != p.dim()) throw ValidationError("initial state dimension differs from parameters");
  const std::size_t n = step_count(T, dt);
  const std::size_t d = p.dim();
  Philox4x32 rng(seed, stream);
  NormalSource normal;
  EulerStepper stepper(p, dt);
  std::vector<double> prev = x0.vector();
  std::vector<double> next(d);
  std::vector<double> z(d);
  SchemeStats stats;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < d; ++j) z[j] = normal(rng);
    next = prev;
    if (stepper.advance(next, z)) ++stats.projected_steps;
    ++stats.steps;
    obs(static_cast<double>(s) * dt, std::span<const double>(prev), std::span<const double>(next));
    prev.swap(next);
  }
  return stats;
}

/// A stored discretized trajectory. States are kept row-major in one buffer.
struct SimPath {
  std::vector<double> times;
  std::vector<double> states;
  ModelParams params;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  double dt = 0.0;
  SchemeStats stats;

  std::size_t dim() const { return params.dim(); }
  std::size_t size() const { return times.size(); }
  std::span<const double> row(std::size_t n) const { return {states.data() + n * dim(), dim()}; }
  SimplexVec state(std::size_t n) const {
    const auto r = row(n);
    return SimplexVec(std::vector<double>(r.begin(), r.end()));
  }
};

inline SimPath simulate(const ModelParams& p, const SimplexVec& x0, double T, double dt, std::uint64_t seed,
                        std::uint64_t stream = 0) {
  SimPath path;
  path.params = p;
  path.seed = seed;
  path.stream = stream;
  path.dt = dt;
  const std::size_t n = step_count(T, dt);
  path.times.reserve(n + 1);
  path.states.reserve((n + 1) * p.dim());
  path.times.push_back(0.0);
  path.states.insert(path.states.end(), x0.values().begin(), x0.values().end());
  path.stats = simulate_stream(p, x0, T, dt, seed, stream, [&](double t, auto, std::span<const double> next) {
    path.times.push_back(t + dt);
    path.states.insert(path.states.end(), next.begin(), next.end());
  });
  return path;
}

/// Paths sharing parameters and grid; path i uses Philox stream i under the master seed.
struct PathBatch {
  std::uint64_t master_seed = 0;
  std::vector<SimPath> paths;

  SchemeStats stats() const {
    SchemeStats s;
    for (const auto& p : paths) s += p.stats;
    return s;
  }
};

inline PathBatch simulate_batch(const ModelParams& p, const SimplexVec& x0, double T, double dt,
                                std::uint64_t master_seed, std::size_t n_paths, unsigned threads = 1) {
  PathBatch batch;
  batch.master_seed = master_seed;
  batch.paths.resize(n_paths);
  parallel_for(n_paths, threads, [&](std::size_t i) { batch.paths[i] = simulate(p, x0, T, dt, master_seed, i); });
  return batch;
}

}  // namespace hjacobi
