#pragma once

// Blocked covariance engine for the common-spatial-component model.
//
// The stacked response is component-major: all n sites of component 1, then
// all sites of component 2, and so on. With m = B-1 components, the
// covariance of that vector is
//
//   Sigma = kron(s s^T, P) + kron(diag(t) C diag(t), I_n)
//
// where s_r = sigma_r, t_r = tau_r, P is the n x n spatial correlation matrix
// rho(||u_i - u_i'||; phi) and C is the m x m nugget correlation matrix with
// unit diagonal and off-diagonals rho_rr'. The nugget term is keyed on row
// identity (i == i'), never on zero distance.

#include "geocomp/correlation.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace geocomp {

/// n x 2 projected coordinates. Duplicate rows are allowed.
class SpatialLocations {
 public:
  SpatialLocations() = default;
  explicit SpatialLocations(Eigen::MatrixX2d coords);

  const Eigen::MatrixX2d& coords() const { return coords_; }
  std::size_t size() const { return static_cast<std::size_t>(coords_.rows()); }
  SpatialLocations subset(const std::vector<std::size_t>& rows) const;

 private:
  Eigen::MatrixX2d coords_;
};

/// Covariance parameters lambda = (sigma2_1..m, tau2_1..m, phi, rho...).
///
/// Cross-correlations are stacked by columns of the strict lower triangle of
/// C: (2,1), (3,1), ..., (m,1), (3,2), ... which for B = 3 is just rho_12.
struct CovarianceParams {
  Eigen::VectorXd sigma2;
  Eigen::VectorXd tau2;
  double phi = 1.0;
  Eigen::VectorXd rho;

  std::size_t components() const { return static_cast<std::size_t>(sigma2.size()); }
  /// Q = 2m + 1 + m(m-1)/2.
  std::size_t size() const;

  Eigen::VectorXd to_vector() const;
  static CovarianceParams from_vector(const Eigen::VectorXd& lambda, std::size_t components);

  /// m x m nugget correlation matrix C.
  Eigen::MatrixXd nugget_correlation() const;

  /// Throws std::domain_error unless sigma2, tau2 >= 0, phi > 0, |rho| < 1
  /// and C is positive definite.
  void validate() const;
};

inline std::size_t parameter_count(std::size_t components) {
  return 2 * components + 1 + components * (components - 1) / 2;
}

/// Position of rho_{ab} (a != b, zero-based) in the stacked rho vector.
std::size_t rho_index(std::size_t a, std::size_t b, std::size_t components);

/// Names for each entry of lambda: sigma2_1, ..., tau2_1, ..., phi, rho_12, ...
std::vector<std::string> parameter_names(std::size_t components);
/// Inverse of parameter_names; throws std::domain_error for unknown names.
std::size_t parameter_index(const std::string& name, std::size_t components);

/// Symmetric positive definite n(B-1) x n(B-1) covariance with its Cholesky
/// factor computed at construction. Immutable after construction.
class BlockCovariance {
 public:
  /// Factors `matrix`; throws NumericError carrying the first failing pivot.
  explicit BlockCovariance(Eigen::MatrixXd matrix);

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::LLT<Eigen::MatrixXd>& cholesky() const { return llt_; }
  Eigen::Index dim() const { return matrix_.rows(); }

  double log_det() const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return llt_.solve(rhs); }
  /// L^{-1} rhs.
  Eigen::MatrixXd whiten(const Eigen::MatrixXd& rhs) const;
  Eigen::MatrixXd inverse() const;

 private:
  Eigen::MatrixXd matrix_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

Eigen::MatrixXd distance_matrix(const SpatialLocations& locs);

/// rho(u; phi) for a single distance.
double correlation(double u, double phi, const CorrelationFamily& fam);

/// Raw Sigma assembled from a precomputed distance matrix; not factored.
Eigen::MatrixXd assemble_sigma(const Eigen::MatrixXd& dist, const CovarianceParams& params,
                               const CorrelationFamily& fam);

BlockCovariance build_sigma(const SpatialLocations& locs, const CovarianceParams& params,
                            const CorrelationFamily& fam);
BlockCovariance build_sigma(const Eigen::MatrixXd& dist, const CovarianceParams& params,
                            const CorrelationFamily& fam);

/// d Sigma / d lambda_q, with sigma2 and tau2 differentiated on the variance
/// scale: d(sigma_r sigma_s)/d sigma2_r = sigma_s / (2 sigma_r).
/// Throws std::domain_error for q >= Q or a zero sigma2/tau2 that would be divided by.
Eigen::MatrixXd sigma_derivative(const Eigen::MatrixXd& dist, const CovarianceParams& params,
                                 const CorrelationFamily& fam, std::size_t q);
Eigen::MatrixXd sigma_derivative(const SpatialLocations& locs, const CovarianceParams& params,
                                 const CorrelationFamily& fam, std::size_t q);

struct CrossCovariance {
  /// n0(B-1) x n(B-1): Cov(Y0, Y). Prediction sites never share a nugget with
  /// observations, even at distance 0.
  Eigen::MatrixXd cross;
  /// n0(B-1) x n0(B-1): Cov(Y0, Y0), with the prediction-site nugget when requested.
  Eigen::MatrixXd new_block;
};

CrossCovariance cross_sigma(const SpatialLocations& obs, const SpatialLocations& fresh,
                            const CovarianceParams& params, const CorrelationFamily& fam,
                            bool include_nugget = true);

/// m x m coefficient matrices: s s^T and diag(t) C diag(t).
Eigen::MatrixXd spatial_coefficients(const CovarianceParams& params);
Eigen::MatrixXd nugget_coefficients(const CovarianceParams& params);

}  // namespace geocomp
