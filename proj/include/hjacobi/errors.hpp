#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace hjacobi {

/// Bad input: malformed parameters, out-of-range indices, off-simplex vectors.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what, std::optional<std::size_t> index = std::nullopt)
      : std::invalid_argument(what), index_(index) {}

  /// 1-based index of the violated condition, when there is one.
  std::optional<std::size_t> index() const { return index_; }

 private:
  std::optional<std::size_t> index_;
};

/// Evaluation at a point where a quantity is undefined (boundary, zero denominator).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Numerical diagnostic failure: divergence, low ESS, acceptance collapse.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The growth-optimal strategy does not exist for the requested open market.
class GrowthConditionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace hjacobi
