#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "hjacobi/rng.hpp"

namespace testgen {

/// Deterministic generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed, 7) {}

  double uniform(double lo = 0.0, double hi = 1.0) { return lo + (hi - lo) * rng_.uniform_open(); }

  std::size_t index(std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng_.uniform_open() * static_cast<double>(hi - lo + 1));
  }

  /// Interior simplex point with entries bounded away from 0.
  std::vector<double> simplex(std::size_t d, double floor = 1e-3) {
    std::vector<double> x(d);
    double s = 0.0;
    for (auto& v : x) {
      v = floor + rng_.uniform_open();
      s += v;
    }
    for (auto& v : x) v /= s;
    return x;
  }

  /// Interior point with pairwise distinct entries (no ties).
  std::vector<double> distinct_simplex(std::size_t d) {
    for (;;) {
      auto x = simplex(d);
      auto s = x;
      std::sort(s.begin(), s.end());
      if (std::adjacent_find(s.begin(), s.end()) == s.end()) return x;
    }
  }

  std::vector<double> reals(std::size_t d, double lo, double hi) {
    std::vector<double> v(d);
    for (auto& e : v) e = uniform(lo, hi);
    return v;
  }

  hjacobi::Philox4x32& rng() { return rng_; }

 private:
  hjacobi::Philox4x32 rng_;
};

}  // namespace testgen
