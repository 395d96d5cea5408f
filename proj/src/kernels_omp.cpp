#include "geocomp/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace geocomp::kernels {

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixX2d& a, const Eigen::MatrixX2d& b) {
  const Eigen::Index n = a.rows();
  const Eigen::Index n0 = b.rows();
  Eigen::MatrixXd d(n, n0);
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < n0; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dx = a(i, 0) - b(j, 0);
      const double dy = a(i, 1) - b(j, 1);
      d(i, j) = std::sqrt(dx * dx + dy * dy);
    }
  }
  return d;
}

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& dist, double phi, const CorrelationFamily& fam) {
  Eigen::MatrixXd c(dist.rows(), dist.cols());
  const Eigen::Index total = dist.size();
  const double* src = dist.data();
  double* dst = c.data();
#pragma omp parallel for schedule(static)
  for (Eigen::Index k = 0; k < total; ++k) dst[k] = fam(src[k], phi);
  return c;
}

Eigen::MatrixXd correlation_phi_derivative(const Eigen::MatrixXd& dist, double phi, const CorrelationFamily& fam) {
  Eigen::MatrixXd c(dist.rows(), dist.cols());
  const Eigen::Index total = dist.size();
  const double* src = dist.data();
  double* dst = c.data();
#pragma omp parallel for schedule(static)
  for (Eigen::Index k = 0; k < total; ++k) dst[k] = fam.d_phi(src[k], phi);
  return c;
}

Eigen::MatrixXd assemble_blocks(const Eigen::MatrixXd& spatial, const Eigen::MatrixXd& spatial_coef,
                                const Eigen::MatrixXd* site_coef) {
  const Eigen::Index n = spatial.rows();
  const Eigen::Index n0 = spatial.cols();
  const Eigen::Index m = spatial_coef.rows();
  if (site_coef && n != n0) throw std::invalid_argument("same-site term needs a square spatial block");
  Eigen::MatrixXd out(m * n, m * n0);
  // One task per (block column, site column); inner loop walks a contiguous column.
#pragma omp parallel for collapse(2) schedule(static)
  for (Eigen::Index s = 0; s < m; ++s) {
    for (Eigen::Index j = 0; j < n0; ++j) {
      for (Eigen::Index r = 0; r < m; ++r) {
        const double a = spatial_coef(r, s);
        double* col = out.data() + (s * n0 + j) * (m * n) + r * n;
        const double* sp = spatial.data() + j * n;
        for (Eigen::Index i = 0; i < n; ++i) col[i] = a * sp[i];
        if (site_coef) col[j] += (*site_coef)(r, s);
      }
    }
  }
  return out;
}

}  // namespace geocomp::kernels
