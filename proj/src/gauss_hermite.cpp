#include "geocomp/gauss_hermite.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace geocomp {

Eigen::VectorXd hermite_orthonormal(int k, double x) {
  Eigen::VectorXd psi(k + 1);
  psi[0] = std::pow(std::numbers::pi, -0.25);
  if (k >= 1) psi[1] = std::sqrt(2.0) * x * psi[0];
  for (int j = 1; j < k; ++j)
    psi[j + 1] = std::sqrt(2.0 / (j + 1)) * x * psi[j] - std::sqrt(static_cast<double>(j) / (j + 1)) * psi[j - 1];
  return psi;
}

GaussHermiteRule gauss_hermite_rule(int k) {
  if (k < 1 || k > 100) throw std::domain_error("Gauss-Hermite order must lie in [1, 100]");
  GaussHermiteRule rule;
  rule.k = k;
  if (k == 1) {
    rule.nodes = Eigen::VectorXd::Zero(1);
    rule.weights = Eigen::VectorXd::Constant(1, std::sqrt(std::numbers::pi));
    return rule;
  }

  Eigen::VectorXd diag = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd off(k - 1);
  for (int j = 1; j < k; ++j) off[j - 1] = std::sqrt(0.5 * j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  eig.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
  Eigen::VectorXd x = eig.eigenvalues();

  // psi_K' = sqrt(2K) psi_{K-1}
  for (int i = 0; i < k; ++i) {
    for (int it = 0; it < 3; ++it) {
      const Eigen::VectorXd psi = hermite_orthonormal(k, x[i]);
      const double deriv = std::sqrt(2.0 * k) * psi[k - 1];
      if (deriv == 0.0) break;
      x[i] -= psi[k] / deriv;
    }
  }
  for (int i = 0; i < k / 2; ++i) {
    const double a = 0.5 * (x[k - 1 - i] - x[i]);
    x[i] = -a;
    x[k - 1 - i] = a;
  }
  if (k % 2 == 1) x[k / 2] = 0.0;

  rule.nodes = x;
  rule.weights.resize(k);
  for (int i = 0; i < k; ++i) {
    const double p = hermite_orthonormal(k - 1, x[i])[k - 1];
    rule.weights[i] = 1.0 / (k * p * p);
  }
  for (int i = 0; i < k / 2; ++i) {
    const double w = 0.5 * (rule.weights[i] + rule.weights[k - 1 - i]);
    rule.weights[i] = rule.weights[k - 1 - i] = w;
  }
  return rule;
}

}  // namespace geocomp
