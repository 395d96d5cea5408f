#pragma once

#include <Eigen/Dense>

namespace geocomp {

/// K-point rule for integrals of the form  int g(x) exp(-x^2) dx.
struct GaussHermiteRule {
  int k = 0;
  /// Ascending, symmetric about zero.
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

/// Nodes from the Golub-Welsch eigenproblem of the Hermite recurrence,
/// polished by Newton steps on H_K. Throws std::domain_error unless 1 <= k <= 100.
GaussHermiteRule gauss_hermite_rule(int k);

/// Orthonormal Hermite function values psi_0..psi_k at x, where
/// psi_j = H_j / sqrt(2^j j! sqrt(pi)).
Eigen::VectorXd hermite_orthonormal(int k, double x);

}  // namespace geocomp
