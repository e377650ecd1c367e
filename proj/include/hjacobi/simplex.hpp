#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hjacobi/errors.hpp"

namespace hjacobi {

inline constexpr double kSimplexTol = 1e-12;
inline constexpr double kRenormalizeTol = 1e-9;

namespace detail {

inline std::vector<double> checked_simplex_entries(std::vector<double> v) {
  if (v.size() < 2) throw ValidationError("simplex vector needs dimension >= 2");
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw ValidationError("non-finite simplex entry", i + 1);
    if (v[i] < -kRenormalizeTol || v[i] > 1.0 + kRenormalizeTol)
      throw ValidationError("simplex entry outside [0,1]", i + 1);
    v[i] = std::clamp(v[i], 0.0, 1.0);
    sum += v[i];
  }
  if (std::abs(sum - 1.0) > kRenormalizeTol)
    throw ValidationError("simplex entries sum to " + std::to_string(sum));
  if (std::abs(sum - 1.0) > 0.0)
    for (double& e : v) e /= sum;
  return v;
}

inline void check_index(std::size_t i, std::size_t d, const char* what) {
  if (i < 1 || i > d) throw ValidationError(std::string(what) + " out of range", i);
}

}  // namespace detail

/// A point of the closed unit simplex. Element access is 0-based like any
/// container; rank and name functions take and return 1-based indices.
class SimplexVec {
 public:
  explicit SimplexVec(std::vector<double> entries) : x_(detail::checked_simplex_entries(std::move(entries))) {}

  static SimplexVec uniform(std::size_t d) { return SimplexVec(std::vector<double>(d, 1.0 / static_cast<double>(d))); }

  static SimplexVec vertex(std::size_t d, std::size_t i) {
    detail::check_index(i, d, "vertex index");
    std::vector<double> v(d, 0.0);
    v[i - 1] = 1.0;
    return SimplexVec(std::move(v));
  }

  std::size_t dim() const { return x_.size(); }
  double operator[](std::size_t i) const { return x_[i]; }
  std::span<const double> values() const { return x_; }
  const std::vector<double>& vector() const { return x_; }
  Eigen::Map<const Eigen::VectorXd> eigen() const { return {x_.data(), static_cast<Eigen::Index>(x_.size())}; }

 private:
  std::vector<double> x_;
};

/// Ranked weights y_1 >= ... >= y_d on the simplex.
class RankedVec {
 public:
  explicit RankedVec(std::vector<double> entries) : y_(detail::checked_simplex_entries(std::move(entries))) {
    for (std::size_t k = 1; k < y_.size(); ++k)
      if (y_[k] > y_[k - 1]) throw ValidationError("ranked entries must be non-increasing", k + 1);
  }

  std::size_t dim() const { return y_.size(); }
  double operator[](std::size_t k) const { return y_[k]; }
  std::span<const double> values() const { return y_; }
  const std::vector<double>& vector() const { return y_; }

 private:
  std::vector<double> y_;
};

/// Rank order of a state: names[k] is the 0-based name holding rank k+1.
///
/// Stable with respect to names, so equal values keep the smaller name first.
inline void rank_order(std::span<const double> x, std::span<std::size_t> names) {
  const std::size_t d = x.size();
  for (std::size_t i = 0; i < d; ++i) names[i] = i;
  if (d <= 16) {
    for (std::size_t i = 1; i < d; ++i) {
      const std::size_t cur = names[i];
      std::size_t j = i;
      while (j > 0 && x[names[j - 1]] < x[cur]) {
        names[j] = names[j - 1];
        --j;
      }
      names[j] = cur;
    }
  } else {
    std::stable_sort(names.begin(), names.end(), [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  }
}

inline std::vector<std::size_t> rank_order(std::span<const double> x) {
  std::vector<std::size_t> names(x.size());
  rank_order(x, names);
  return names;
}

/// Rank (1-based) of name i (1-based).
inline std::size_t rank_of(const SimplexVec& x, std::size_t i) {
  detail::check_index(i, x.dim(), "name");
  const auto names = rank_order(x.values());
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] == i - 1) return k + 1;
  return 0;
}

/// Name (1-based) holding rank k (1-based).
inline std::size_t name_of(const SimplexVec& x, std::size_t k) {
  detail::check_index(k, x.dim(), "rank");
  return rank_order(x.values())[k - 1] + 1;
}

/// Ranked image x_() of a state.
inline RankedVec ranked(const SimplexVec& x) {
  const auto names = rank_order(x.values());
  std::vector<double> y(x.dim());
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = x[names[k]];
  return RankedVec(std::move(y));
}

/// Tail sum v_k + ... + v_d with 1-based k.
inline double tail_sum(std::span<const double> v, std::size_t k) {
  detail::check_index(k, v.size(), "tail index");
  double s = 0.0;
  for (std::size_t l = v.size(); l-- > k - 1;) s += v[l];
  return s;
}

/// All tail sums at once; out[k-1] = tail_sum(v, k).
inline std::vector<double> tail_sums(std::span<const double> v) {
  std::vector<double> out(v.size());
  double s = 0.0;
  for (std::size_t l = v.size(); l-- > 0;) {
    s += v[l];
    out[l] = s;
  }
  return out;
}

/// Sorted set of distinct 1-based names.
class IndexSet {
 public:
  IndexSet() = default;
  IndexSet(std::vector<std::size_t> indices, std::size_t d) : idx_(std::move(indices)) {
    std::sort(idx_.begin(), idx_.end());
    if (std::adjacent_find(idx_.begin(), idx_.end()) != idx_.end()) throw ValidationError("duplicate index in set");
    for (std::size_t i : idx_) detail::check_index(i, d, "set index");
  }

  static IndexSet all(std::size_t d) {
    std::vector<std::size_t> v(d);
    std::iota(v.begin(), v.end(), std::size_t{1});
    return IndexSet(std::move(v), d);
  }

  std::size_t size() const { return idx_.size(); }
  bool empty() const { return idx_.empty(); }
  bool contains(std::size_t i) const { return std::binary_search(idx_.begin(), idx_.end(), i); }
  const std::vector<std::size_t>& indices() const { return idx_; }
  auto begin() const { return idx_.begin(); }
  auto end() const { return idx_.end(); }

 private:
  std::vector<std::size_t> idx_;
};

/// Λ_I(x) = Σ_{i∈I} x_i, zero for the empty set.
inline double lambda_sum(std::span<const double> x, const IndexSet& set) {
  double s = 0.0;
  for (std::size_t i : set) {
    if (i > x.size()) throw ValidationError("set index exceeds dimension", i);
    s += x[i - 1];
  }
  return s;
}

inline double lambda_sum(const SimplexVec& x, const IndexSet& set) { return lambda_sum(x.values(), set); }

/// c_ij = σ² x_i (δ_ij − x_j).
inline Eigen::MatrixXd wright_fisher_matrix(std::span<const double> x, double sigma) {
  const auto d = static_cast<Eigen::Index>(x.size());
  const double s2 = sigma * sigma;
  Eigen::MatrixXd c(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) c(i, j) = s2 * x[i] * ((i == j ? 1.0 : 0.0) - x[j]);
  return c;
}

inline Eigen::MatrixXd diffusion_c(const SimplexVec& x, double sigma) { return wright_fisher_matrix(x.values(), sigma); }

inline Eigen::MatrixXd diffusion_kappa(const RankedVec& y, double sigma) {
  return wright_fisher_matrix(y.values(), sigma);
}

/// u^T c(x) v without forming c.
inline double c_quadratic(std::span<const double> x, double sigma, std::span<const double> u,
                          std::span<const double> v) {
  double uvx = 0.0, ux = 0.0, vx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    uvx += u[i] * v[i] * x[i];
    ux += u[i] * x[i];
    vx += v[i] * x[i];
  }
  return sigma * sigma * (uvx - ux * vx);
}

}  // namespace hjacobi
