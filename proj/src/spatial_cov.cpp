#include "geocomp/spatial_cov.hpp"

#include "geocomp/errors.hpp"
#include "geocomp/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace geocomp {

// ---------------------------------------------------------------- correlation

double CorrelationFamily::operator()(double u, double phi) const {
  if (!(phi > 0.0)) throw std::domain_error("correlation range phi must be positive");
  if (u < 0.0) throw std::domain_error("distance must be nonnegative");
  switch (kind) {
    case CorrelationKind::exponential:
      return std::exp(-u / phi);
    case CorrelationKind::spherical: {
      if (u >= phi) return 0.0;
      const double t = u / phi;
      return 1.0 - 1.5 * t + 0.5 * t * t * t;
    }
    case CorrelationKind::matern: {
      if (u == 0.0) return 1.0;
      const double nu = smoothness;
      const double t = u / phi;
      if (t > 700.0) return 0.0;
      return std::exp((1.0 - nu) * std::log(2.0) - std::lgamma(nu) + nu * std::log(t)) *
             std::cyl_bessel_k(nu, t);
    }
  }
  return 0.0;
}

double CorrelationFamily::d_phi(double u, double phi) const {
  if (!(phi > 0.0)) throw std::domain_error("correlation range phi must be positive");
  if (u < 0.0) throw std::domain_error("distance must be nonnegative");
  switch (kind) {
    case CorrelationKind::exponential:
      return std::exp(-u / phi) * u / (phi * phi);
    case CorrelationKind::spherical: {
      if (u >= phi) return 0.0;
      const double t = u / phi;
      return 1.5 * t / phi - 1.5 * t * t * t / phi;
    }
    case CorrelationKind::matern: {
      if (u == 0.0) return 0.0;
      const double nu = smoothness;
      const double t = u / phi;
      if (t > 700.0) return 0.0;
      // d/dt [t^nu K_nu(t)] = -t^nu K_{nu-1}(t), and K_{-v} = K_v.
      return std::exp((1.0 - nu) * std::log(2.0) - std::lgamma(nu) + (nu + 1.0) * std::log(t)) *
             std::cyl_bessel_k(std::abs(nu - 1.0), t) / phi;
    }
  }
  return 0.0;
}

std::string CorrelationFamily::name() const {
  switch (kind) {
    case CorrelationKind::exponential: return "exponential";
    case CorrelationKind::spherical: return "spherical";
    case CorrelationKind::matern: return "matern";
  }
  return "unknown";
}

CorrelationFamily CorrelationFamily::parse(std::string_view name, double smoothness) {
  if (!(smoothness > 0.0)) throw std::domain_error("Matern smoothness must be positive");
  if (name == "exponential") return {CorrelationKind::exponential, smoothness};
  if (name == "spherical") return {CorrelationKind::spherical, smoothness};
  if (name == "matern") return {CorrelationKind::matern, smoothness};
  throw std::domain_error("unknown correlation family '" + std::string(name) + "'");
}

double correlation(double u, double phi, const CorrelationFamily& fam) { return fam(u, phi); }

// ------------------------------------------------------------------ locations

SpatialLocations::SpatialLocations(Eigen::MatrixX2d coords) : coords_(std::move(coords)) {
  if (coords_.rows() < 1) throw std::domain_error("at least one spatial location is required");
  if (!coords_.allFinite()) throw std::domain_error("spatial coordinates must be finite");
}

SpatialLocations SpatialLocations::subset(const std::vector<std::size_t>& rows) const {
  Eigen::MatrixX2d c(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t k = 0; k < rows.size(); ++k) c.row(static_cast<Eigen::Index>(k)) = coords_.row(static_cast<Eigen::Index>(rows[k]));
  return SpatialLocations(std::move(c));
}

Eigen::MatrixXd distance_matrix(const SpatialLocations& locs) {
  Eigen::MatrixXd d = kernels::pairwise_distances(locs.coords(), locs.coords());
  d.diagonal().setZero();
  return d;
}

// ----------------------------------------------------------------- parameters

std::size_t CovarianceParams::size() const { return parameter_count(components()); }

Eigen::VectorXd CovarianceParams::to_vector() const {
  const auto m = static_cast<Eigen::Index>(components());
  Eigen::VectorXd v(static_cast<Eigen::Index>(size()));
  v.head(m) = sigma2;
  v.segment(m, m) = tau2;
  v[2 * m] = phi;
  v.tail(rho.size()) = rho;
  return v;
}

CovarianceParams CovarianceParams::from_vector(const Eigen::VectorXd& lambda, std::size_t components) {
  const auto m = static_cast<Eigen::Index>(components);
  if (static_cast<std::size_t>(lambda.size()) != parameter_count(components))
    throw std::domain_error("parameter vector has the wrong length");
  CovarianceParams p;
  p.sigma2 = lambda.head(m);
  p.tau2 = lambda.segment(m, m);
  p.phi = lambda[2 * m];
  p.rho = lambda.tail(m * (m - 1) / 2);
  return p;
}

std::size_t rho_index(std::size_t a, std::size_t b, std::size_t components) {
  if (a == b || a >= components || b >= components) throw std::domain_error("invalid rho index pair");
  const std::size_t col = std::min(a, b);
  const std::size_t row = std::max(a, b);
  // Columns 0..col-1 of the strict lower triangle hold (m-1) + (m-2) + ... entries.
  const std::size_t before = col * (2 * components - col - 1) / 2;
  return before + (row - col - 1);
}

Eigen::MatrixXd CovarianceParams::nugget_correlation() const {
  const std::size_t m = components();
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      const double r = rho[static_cast<Eigen::Index>(rho_index(a, b, m))];
      c(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = r;
      c(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = r;
    }
  return c;
}

void CovarianceParams::validate() const {
  const std::size_t m = components();
  if (m < 1) throw std::domain_error("at least one transformed component is required");
  if (static_cast<std::size_t>(tau2.size()) != m || static_cast<std::size_t>(rho.size()) != m * (m - 1) / 2)
    throw std::domain_error("covariance parameter vectors have inconsistent lengths");
  for (Eigen::Index r = 0; r < sigma2.size(); ++r) {
    if (!(sigma2[r] >= 0.0) || !std::isfinite(sigma2[r])) throw std::domain_error("sigma2 must be nonnegative");
    if (!(tau2[r] >= 0.0) || !std::isfinite(tau2[r])) throw std::domain_error("tau2 must be nonnegative");
  }
  if (!(phi > 0.0) || !std::isfinite(phi)) throw std::domain_error("phi must be positive");
  for (Eigen::Index k = 0; k < rho.size(); ++k)
    if (!(std::abs(rho[k]) < 1.0)) throw std::domain_error("cross-correlations must lie in (-1, 1)");
  if (m > 2) {
    Eigen::LLT<Eigen::MatrixXd> llt(nugget_correlation());
    if (llt.info() != Eigen::Success) throw std::domain_error("nugget correlation matrix is not positive definite");
  }
}

std::vector<std::string> parameter_names(std::size_t components) {
  std::vector<std::string> names;
  for (std::size_t r = 0; r < components; ++r) names.push_back("sigma2_" + std::to_string(r + 1));
  for (std::size_t r = 0; r < components; ++r) names.push_back("tau2_" + std::to_string(r + 1));
  names.emplace_back("phi");
  std::vector<std::string> rho(components * (components - 1) / 2);
  for (std::size_t a = 0; a < components; ++a)
    for (std::size_t b = a + 1; b < components; ++b)
      rho[rho_index(a, b, components)] = "rho_" + std::to_string(a + 1) + std::to_string(b + 1);
  names.insert(names.end(), rho.begin(), rho.end());
  return names;
}

std::size_t parameter_index(const std::string& name, std::size_t components) {
  const auto names = parameter_names(components);
  for (std::size_t q = 0; q < names.size(); ++q)
    if (names[q] == name) return q;
  throw std::domain_error("unknown covariance parameter '" + name + "'");
}

Eigen::MatrixXd spatial_coefficients(const CovarianceParams& params) {
  const Eigen::VectorXd s = params.sigma2.cwiseSqrt();
  return s * s.transpose();
}

Eigen::MatrixXd nugget_coefficients(const CovarianceParams& params) {
  const Eigen::VectorXd t = params.tau2.cwiseSqrt();
  Eigen::MatrixXd c = params.nugget_correlation();
  return t.asDiagonal() * c * t.asDiagonal();
}

// ----------------------------------------------------------- block covariance

namespace {

// First index where an unblocked Cholesky meets a nonpositive pivot. Only
// called after Eigen's factorization has already failed.
std::size_t failing_pivot(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0)) return static_cast<std::size_t>(j);
    l(j, j) = std::sqrt(d);
    for (Eigen::Index i = j + 1; i < n; ++i)
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
  }
  return static_cast<std::size_t>(n);
}

}  // namespace

BlockCovariance::BlockCovariance(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
  llt_.compute(matrix_);
  bool ok = llt_.info() == Eigen::Success;
  if (ok) {
    const auto diag = llt_.matrixLLT().diagonal();
    ok = diag.allFinite() && (diag.array() > 0.0).all();
  }
  if (!ok) {
    const std::size_t pivot = failing_pivot(matrix_);
    throw NumericError("covariance matrix is not positive definite (pivot " + std::to_string(pivot) + ")", pivot);
  }
}

double BlockCovariance::log_det() const { return 2.0 * llt_.matrixLLT().diagonal().array().log().sum(); }

Eigen::MatrixXd BlockCovariance::whiten(const Eigen::MatrixXd& rhs) const { return llt_.matrixL().solve(rhs); }

Eigen::MatrixXd BlockCovariance::inverse() const {
  return llt_.solve(Eigen::MatrixXd::Identity(matrix_.rows(), matrix_.cols()));
}

Eigen::MatrixXd assemble_sigma(const Eigen::MatrixXd& dist, const CovarianceParams& params,
                               const CorrelationFamily& fam) {
  params.validate();
  const Eigen::MatrixXd spatial = kernels::correlation_matrix(dist, params.phi, fam);
  const Eigen::MatrixXd a = spatial_coefficients(params);
  const Eigen::MatrixXd t = nugget_coefficients(params);
  return kernels::assemble_blocks(spatial, a, &t);
}

BlockCovariance build_sigma(const Eigen::MatrixXd& dist, const CovarianceParams& params,
                            const CorrelationFamily& fam) {
  return BlockCovariance(assemble_sigma(dist, params, fam));
}

BlockCovariance build_sigma(const SpatialLocations& locs, const CovarianceParams& params,
                            const CorrelationFamily& fam) {
  return build_sigma(distance_matrix(locs), params, fam);
}

Eigen::MatrixXd sigma_derivative(const Eigen::MatrixXd& dist, const CovarianceParams& params,
                                 const CorrelationFamily& fam, std::size_t q) {
  params.validate();
  const std::size_t m = params.components();
  const auto mi = static_cast<Eigen::Index>(m);
  if (q >= params.size()) throw std::domain_error("unknown covariance parameter selector " + std::to_string(q));
  const Eigen::VectorXd s = params.sigma2.cwiseSqrt();
  const Eigen::VectorXd t = params.tau2.cwiseSqrt();
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(mi, mi);

  if (q == 2 * m) {
    const Eigen::MatrixXd dp = kernels::correlation_phi_derivative(dist, params.phi, fam);
    return kernels::assemble_blocks(dp, spatial_coefficients(params), nullptr);
  }

  const Eigen::MatrixXd spatial = kernels::correlation_matrix(dist, params.phi, fam);

  if (q < m) {
    const auto r = static_cast<Eigen::Index>(q);
    if (!(s[r] > 0.0)) throw std::domain_error("sigma2 derivative undefined at sigma2 = 0");
    Eigen::MatrixXd da = zero;
    for (Eigen::Index b = 0; b < mi; ++b) {
      if (b == r) {
        da(r, r) = 1.0;
      } else {
        da(r, b) = s[b] / (2.0 * s[r]);
        da(b, r) = da(r, b);
      }
    }
    return kernels::assemble_blocks(spatial, da, &zero);
  }

  Eigen::MatrixXd dt = zero;
  if (q < 2 * m) {
    const auto r = static_cast<Eigen::Index>(q - m);
    if (!(t[r] > 0.0)) throw std::domain_error("tau2 derivative undefined at tau2 = 0");
    const Eigen::MatrixXd c = params.nugget_correlation();
    for (Eigen::Index b = 0; b < mi; ++b) {
      if (b == r) {
        dt(r, r) = 1.0;
      } else {
        dt(r, b) = t[b] * c(r, b) / (2.0 * t[r]);
        dt(b, r) = dt(r, b);
      }
    }
  } else {
    const std::size_t k = q - 2 * m - 1;
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b)
        if (rho_index(a, b, m) == k) {
          const auto ai = static_cast<Eigen::Index>(a);
          const auto bi = static_cast<Eigen::Index>(b);
          dt(ai, bi) = t[ai] * t[bi];
          dt(bi, ai) = dt(ai, bi);
        }
  }
  return kernels::assemble_blocks(Eigen::MatrixXd::Zero(spatial.rows(), spatial.cols()), zero, &dt);
}

Eigen::MatrixXd sigma_derivative(const SpatialLocations& locs, const CovarianceParams& params,
                                 const CorrelationFamily& fam, std::size_t q) {
  return sigma_derivative(distance_matrix(locs), params, fam, q);
}

CrossCovariance cross_sigma(const SpatialLocations& obs, const SpatialLocations& fresh,
                            const CovarianceParams& params, const CorrelationFamily& fam,
                            bool include_nugget) {
  params.validate();
  const Eigen::MatrixXd a = spatial_coefficients(params);
  // Rows are prediction sites, columns observed sites.
  const Eigen::MatrixXd cross_dist = kernels::pairwise_distances(fresh.coords(), obs.coords());
  const Eigen::MatrixXd cross_corr = kernels::correlation_matrix(cross_dist, params.phi, fam);

  Eigen::MatrixXd new_dist = kernels::pairwise_distances(fresh.coords(), fresh.coords());
  new_dist.diagonal().setZero();
  const Eigen::MatrixXd new_corr = kernels::correlation_matrix(new_dist, params.phi, fam);
  const Eigen::MatrixXd t = include_nugget ? nugget_coefficients(params)
                                           : Eigen::MatrixXd::Zero(a.rows(), a.cols()).eval();
  return {kernels::assemble_blocks(cross_corr, a, nullptr), kernels::assemble_blocks(new_corr, a, &t)};
}

}  // namespace geocomp
