#pragma once

// Simplex arithmetic: closure, additive-log-ratio transform and its inverse,
// compositional geometric mean and the additive-logistic-normal density.
//
// Part indices are zero-based throughout the library. The denominator index
// of a Composition names the reference part used by alr().

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace geocomp {

/// A point on the B-part unit simplex.
class Composition {
 public:
  /// Validates: B >= 2, every part > 0, parts sum to 1 within 1e-12,
  /// denominator < B. Throws std::domain_error otherwise.
  Composition(std::vector<double> parts, std::size_t denominator);

  std::span<const double> parts() const { return parts_; }
  double operator[](std::size_t j) const { return parts_[j]; }
  std::size_t size() const { return parts_.size(); }
  std::size_t denominator() const { return denominator_; }

  Eigen::VectorXd to_eigen() const;

 private:
  std::vector<double> parts_;
  std::size_t denominator_;
};

/// B-1 log-ratios against the denominator part, in original part order with
/// the denominator skipped.
struct AlrVector {
  Eigen::VectorXd values;
  std::size_t denominator = 0;

  std::size_t parts() const { return static_cast<std::size_t>(values.size()) + 1; }
};

/// Normalizes strictly positive raw amounts to the simplex.
Composition closure(std::span<const double> raw, std::size_t denominator);
/// Same, with the last part as denominator.
Composition closure(std::span<const double> raw);

AlrVector alr(const Composition& x);

/// Additive generalized logistic transform (inverse of alr). Evaluated with a
/// max-shift so |y_j| up to ~700 stays finite, and renormalized at the end.
Composition agl(const AlrVector& y);

/// Allocation-free agl for hot loops: `y` has B-1 entries, `out` has B.
void agl_into(std::span<const double> y, std::size_t denominator, std::span<double> out);

/// Closure of the part-wise geometric means. All inputs must share B and the
/// denominator index.
Composition geometric_mean(std::span<const Composition> xs);

/// Index of the part with the largest geometric mean across `xs`.
std::size_t most_abundant_part(std::span<const Composition> xs);

/// Log of the additive-logistic-normal density: the Gaussian log-density of
/// alr(x) under N(mu, sigma) minus sum_i ln x_i (Jacobian of agl).
/// Throws NumericError when sigma is not positive definite.
double aln_log_density(const Composition& x, const AlrVector& mu, const Eigen::MatrixXd& sigma);

}  // namespace geocomp
