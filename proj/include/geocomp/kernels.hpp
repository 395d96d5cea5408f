#pragma once

// Dense assembly kernels behind the covariance engine.
//
// geocomp::kernels holds the OpenMP versions used in production code;
// geocomp::reference holds plain serial loops with the same signatures. The
// reference versions exist for the test-suite and the benchmark, and both
// must produce bit-identical output (every entry is computed independently,
// there are no reductions).

#include "geocomp/correlation.hpp"

#include <Eigen/Dense>

namespace geocomp {

namespace kernels {

/// Euclidean distances between the rows of `a` (n x 2) and `b` (n0 x 2).
Eigen::MatrixXd pairwise_distances(const Eigen::MatrixX2d& a, const Eigen::MatrixX2d& b);

/// Entrywise rho(dist; phi).
Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& dist, double phi, const CorrelationFamily& fam);

/// Entrywise d rho / d phi.
Eigen::MatrixXd correlation_phi_derivative(const Eigen::MatrixXd& dist, double phi, const CorrelationFamily& fam);

/// Component-major block matrix with blocks
///   block(r, s) = spatial_coef(r, s) * spatial + site_coef(r, s) * I
/// i.e. kron(spatial_coef, spatial) + kron(site_coef, I). `site_coef` may be
/// null (no same-site term), otherwise `spatial` must be square.
Eigen::MatrixXd assemble_blocks(const Eigen::MatrixXd& spatial, const Eigen::MatrixXd& spatial_coef,
                                const Eigen::MatrixXd* site_coef);

}  // namespace kernels

namespace reference {

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixX2d& a, const Eigen::MatrixX2d& b);
Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& dist, double phi, const CorrelationFamily& fam);
Eigen::MatrixXd correlation_phi_derivative(const Eigen::MatrixXd& dist, double phi, const CorrelationFamily& fam);
Eigen::MatrixXd assemble_blocks(const Eigen::MatrixXd& spatial, const Eigen::MatrixXd& spatial_coef,
                                const Eigen::MatrixXd* site_coef);

}  // namespace reference

}  // namespace geocomp
