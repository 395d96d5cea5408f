#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace geocomp {

// Invalid arguments (nonpositive parts, bad selectors, malformed grids) are
// reported with std::domain_error. Failures of the numerics themselves use
// NumericError so callers can distinguish "you asked for something invalid"
// from "the matrix you described is not positive definite".
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, std::optional<std::size_t> pivot = std::nullopt)
      : std::runtime_error(what), pivot_(pivot) {}

  /// Index of the failing Cholesky pivot, when the error came from a factorization.
  std::optional<std::size_t> pivot() const { return pivot_; }

 private:
  std::optional<std::size_t> pivot_;
};

/// Rank-deficient design or degenerate (constant) response component.
class RankError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Malformed files or incompatible inputs read from disk.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace geocomp
