#include "geocomp/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace geocomp::reference {

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixX2d& a, const Eigen::MatrixX2d& b) {
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const double dx = a(i, 0) - b(j, 0);
      const double dy = a(i, 1) - b(j, 1);
      d(i, j) = std::sqrt(dx * dx + dy * dy);
    }
  }
  return d;
}

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& dist, double phi, const CorrelationFamily& fam) {
  Eigen::MatrixXd c(dist.rows(), dist.cols());
  for (Eigen::Index i = 0; i < dist.rows(); ++i)
    for (Eigen::Index j = 0; j < dist.cols(); ++j) c(i, j) = fam(dist(i, j), phi);
  return c;
}

Eigen::MatrixXd correlation_phi_derivative(const Eigen::MatrixXd& dist, double phi, const CorrelationFamily& fam) {
  Eigen::MatrixXd c(dist.rows(), dist.cols());
  for (Eigen::Index i = 0; i < dist.rows(); ++i)
    for (Eigen::Index j = 0; j < dist.cols(); ++j) c(i, j) = fam.d_phi(dist(i, j), phi);
  return c;
}

Eigen::MatrixXd assemble_blocks(const Eigen::MatrixXd& spatial, const Eigen::MatrixXd& spatial_coef,
                                const Eigen::MatrixXd* site_coef) {
  const Eigen::Index n = spatial.rows();
  const Eigen::Index n0 = spatial.cols();
  const Eigen::Index m = spatial_coef.rows();
  if (site_coef && n != n0) throw std::invalid_argument("same-site term needs a square spatial block");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m * n, m * n0);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index s = 0; s < m; ++s) {
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n0; ++j) {
          double v = spatial_coef(r, s) * spatial(i, j);
          if (site_coef && i == j) v += (*site_coef)(r, s);
          out(r * n + i, s * n0 + j) = v;
        }
      }
    }
  }
  return out;
}

}  // namespace geocomp::reference
