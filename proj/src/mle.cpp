#include "geocomp/mle.hpp"

#include "geocomp/errors.hpp"
#include "geocomp/kernels.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace geocomp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> default_beta_names(const DesignMatrix& design) {
  std::vector<std::string> names;
  for (std::size_t r = 0; r < design.components(); ++r) {
    const auto p = static_cast<std::size_t>(design.blocks()[r].cols());
    for (std::size_t k = 0; k < p; ++k) {
      std::string name = "beta_" + std::to_string(r + 1);
      if (p > 1) name += "_" + std::to_string(k);
      names.push_back(std::move(name));
    }
  }
  return names;
}

}  // namespace

// ------------------------------------------------------------------- design

DesignMatrix::DesignMatrix(std::vector<Eigen::MatrixXd> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw std::domain_error("design needs at least one component block");
  const Eigen::Index n = blocks_.front().rows();
  for (std::size_t r = 0; r < blocks_.size(); ++r) {
    const auto& b = blocks_[r];
    if (b.rows() != n) throw std::domain_error("design blocks must share the same number of rows");
    if (b.cols() < 1) throw std::domain_error("design block has no columns");
    if (!b.allFinite()) throw std::domain_error("design block contains non-finite values");
  }
}

void DesignMatrix::require_full_rank() const {
  for (std::size_t r = 0; r < blocks_.size(); ++r) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(blocks_[r]);
    if (qr.rank() < blocks_[r].cols())
      throw RankError("design block for component " + std::to_string(r + 1) + " is rank deficient");
  }
}

DesignMatrix DesignMatrix::intercept_only(std::size_t sites, std::size_t components) {
  return DesignMatrix(std::vector<Eigen::MatrixXd>(components, Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(sites), 1)));
}

DesignMatrix DesignMatrix::shared_covariates(const Eigen::MatrixXd& covariates, std::size_t components) {
  Eigen::MatrixXd block(covariates.rows(), covariates.cols() + 1);
  block.col(0).setOnes();
  block.rightCols(covariates.cols()) = covariates;
  return DesignMatrix(std::vector<Eigen::MatrixXd>(components, block));
}

std::size_t DesignMatrix::columns() const {
  std::size_t p = 0;
  for (const auto& b : blocks_) p += static_cast<std::size_t>(b.cols());
  return p;
}

Eigen::MatrixXd DesignMatrix::assembled() const {
  const Eigen::Index n = blocks_.front().rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n * static_cast<Eigen::Index>(components()), static_cast<Eigen::Index>(columns()));
  Eigen::Index col = 0;
  for (std::size_t r = 0; r < blocks_.size(); ++r) {
    d.block(static_cast<Eigen::Index>(r) * n, col, n, blocks_[r].cols()) = blocks_[r];
    col += blocks_[r].cols();
  }
  return d;
}

// --------------------------------------------------------------------- data

ModelData make_model_data(SpatialLocations locations, const Eigen::MatrixXd& alr_values, DesignMatrix design,
                          CorrelationFamily family) {
  const auto n = static_cast<Eigen::Index>(locations.size());
  if (alr_values.rows() != n) throw std::domain_error("alr values and locations disagree on the number of sites");
  if (static_cast<std::size_t>(alr_values.cols()) != design.components() || design.sites() != locations.size())
    throw std::domain_error("design does not match the response shape");
  if (!alr_values.allFinite()) throw std::domain_error("alr values must be finite");
  design.require_full_rank();
  Eigen::VectorXd y(alr_values.size());
  for (Eigen::Index r = 0; r < alr_values.cols(); ++r) y.segment(r * n, n) = alr_values.col(r);
  ModelData data{std::move(locations), {}, std::move(y), std::move(design), {}, family};
  data.distances = distance_matrix(data.locations);
  data.design_matrix = data.design.assembled();
  return data;
}

ModelData make_model_data(const GeoDataset& data, std::size_t denominator, CorrelationFamily family) {
  if (data.compositions.empty()) throw std::domain_error("dataset has no observations");
  const std::size_t parts = data.compositions.front().size();
  if (denominator >= parts) throw std::domain_error("denominator index out of range");
  const auto n = static_cast<Eigen::Index>(data.sites());
  Eigen::MatrixXd y(n, static_cast<Eigen::Index>(parts - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& x = data.compositions[static_cast<std::size_t>(i)];
    const Composition rebased(std::vector<double>(x.parts().begin(), x.parts().end()), denominator);
    y.row(i) = alr(rebased).values.transpose();
  }
  DesignMatrix design = data.covariates.cols() > 0 ? DesignMatrix::shared_covariates(data.covariates, parts - 1)
                                                   : DesignMatrix::intercept_only(data.sites(), parts - 1);
  return make_model_data(data.locations, y, std::move(design), family);
}

// --------------------------------------------------------------- likelihood

GlsResult gls_beta(const BlockCovariance& sigma, const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  if (design.rows() != sigma.dim() || y.size() != sigma.dim())
    throw std::domain_error("gls_beta: dimension mismatch");
  const Eigen::MatrixXd dw = sigma.whiten(design);
  const Eigen::VectorXd yw = sigma.whiten(y);
  const Eigen::MatrixXd info = dw.transpose() * dw;
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) throw RankError("design is rank deficient under the GLS weighting");
  const auto diag = llt.matrixLLT().diagonal();
  if (!(diag.minCoeff() > 1e-7 * diag.maxCoeff())) throw RankError("design is numerically rank deficient");
  GlsResult res;
  res.beta = llt.solve(dw.transpose() * yw);
  res.covariance = llt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
  return res;
}

GlsResult gls_beta(const BlockCovariance& sigma, const DesignMatrix& design, const Eigen::VectorXd& y) {
  return gls_beta(sigma, design.assembled(), y);
}

namespace {

double gaussian_loglik(const BlockCovariance& sigma, const Eigen::VectorXd& resid) {
  const double dim = static_cast<double>(resid.size());
  const Eigen::VectorXd z = sigma.whiten(resid);
  return -0.5 * dim * std::log(2.0 * std::numbers::pi) - 0.5 * sigma.log_det() - 0.5 * z.squaredNorm();
}

}  // namespace

double log_lik(const ModelParams& params, const ModelData& data) {
  if (static_cast<std::size_t>(params.beta.size()) != data.design.columns())
    throw std::domain_error("log_lik: beta has the wrong length");
  const BlockCovariance sigma = build_sigma(data.distances, params.cov, data.family);
  return gaussian_loglik(sigma, data.response - data.design_matrix * params.beta);
}

ProfileEvaluation evaluate_profile(const CovarianceParams& cov, const ModelData& data, bool with_score) {
  if (cov.components() != data.components()) throw std::domain_error("covariance parameters do not match the data");
  const BlockCovariance sigma = build_sigma(data.distances, cov, data.family);
  ProfileEvaluation ev;
  ev.beta = gls_beta(sigma, data.design_matrix, data.response).beta;
  const Eigen::VectorXd resid = data.response - data.design_matrix * ev.beta;
  ev.loglik = gaussian_loglik(sigma, resid);
  if (!with_score) return ev;

  // At beta-hat the profile score equals the partial score in lambda.
  const Eigen::VectorXd alpha = sigma.solve(resid);
  const Eigen::MatrixXd inv = sigma.inverse();
  ev.score.resize(static_cast<Eigen::Index>(cov.size()));
  for (std::size_t q = 0; q < cov.size(); ++q) {
    const Eigen::MatrixXd d = sigma_derivative(data.distances, cov, data.family, q);
    const double trace = inv.cwiseProduct(d).sum();
    const double quad = alpha.dot(d * alpha);
    ev.score[static_cast<Eigen::Index>(q)] = -0.5 * trace + 0.5 * quad;
  }
  return ev;
}

double profile_loglik(const CovarianceParams& cov, const ModelData& data) {
  return evaluate_profile(cov, data, false).loglik;
}

Eigen::VectorXd score(const CovarianceParams& cov, const ModelData& data) {
  return evaluate_profile(cov, data, true).score;
}

// -------------------------------------------------------------- intervals

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

Interval wald_interval(double estimate, double se, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::domain_error("confidence level must lie in (0, 1)");
  const double z = normal_quantile(0.5 + 0.5 * level);
  return {estimate - z * se, estimate + z * se};
}

std::vector<ParameterEstimate> FitResult::variance_scale() const {
  std::vector<ParameterEstimate> rows;
  for (Eigen::Index k = 0; k < params.beta.size(); ++k) {
    const auto ci = wald_interval(params.beta[k], se_beta[k], ci_level);
    rows.push_back({beta_names.at(static_cast<std::size_t>(k)), params.beta[k], se_beta[k], ci.lower, ci.upper});
  }
  const auto names = parameter_names(components());
  const Eigen::VectorXd lambda = params.cov.to_vector();
  for (Eigen::Index q = 0; q < lambda.size(); ++q) {
    const auto ci = wald_interval(lambda[q], se_lambda[q], ci_level);
    rows.push_back({names[static_cast<std::size_t>(q)], lambda[q], se_lambda[q], ci.lower, ci.upper});
  }
  return rows;
}

std::vector<ParameterEstimate> FitResult::sd_scale() const {
  std::vector<ParameterEstimate> rows = variance_scale();
  const std::size_t m = components();
  const std::size_t offset = static_cast<std::size_t>(params.beta.size());
  for (std::size_t k = 0; k < 2 * m; ++k) {
    auto& row = rows[offset + k];
    const double sd = std::sqrt(row.estimate);
    const double se = row.se / (2.0 * sd);
    const auto ci = wald_interval(sd, se, ci_level);
    const std::string prefix = k < m ? "sigma_" : "tau_";
    row = {prefix + std::to_string(k % m + 1), sd, se, ci.lower, ci.upper};
  }
  return rows;
}

// ---------------------------------------------------------------- fitting

std::pair<Eigen::VectorXd, Eigen::VectorXd> parameter_bounds(std::size_t components, const FitOptions& options) {
  const auto m = static_cast<Eigen::Index>(components);
  const auto q = static_cast<Eigen::Index>(parameter_count(components));
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(q, options.variance_floor);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(q, kInf);
  lo.tail(q - 2 * m - 1).setConstant(-1.0 + options.rho_margin);
  hi.tail(q - 2 * m - 1).setConstant(1.0 - options.rho_margin);
  return {lo, hi};
}

CovarianceParams initial_covariance(const ModelData& data) {
  const std::size_t m = data.components();
  const auto n = static_cast<Eigen::Index>(data.sites());
  Eigen::MatrixXd resid(n, static_cast<Eigen::Index>(m));
  CovarianceParams p;
  p.sigma2.resize(static_cast<Eigen::Index>(m));
  p.tau2.resize(static_cast<Eigen::Index>(m));
  for (std::size_t r = 0; r < m; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    const Eigen::MatrixXd& d = data.design.blocks()[r];
    const Eigen::VectorXd y = data.response.segment(ri * n, n);
    const Eigen::VectorXd b = d.colPivHouseholderQr().solve(y);
    resid.col(ri) = y - d * b;
    const double centred_ss = (resid.col(ri).array() - resid.col(ri).mean()).square().sum();
    const double var = n > 1 ? centred_ss / static_cast<double>(n - 1) : 0.0;
    const double scale = 1e-12 * (1.0 + y.squaredNorm() / static_cast<double>(n));
    if (!(var > scale)) throw RankError("transformed component " + std::to_string(r + 1) + " is constant");
    p.sigma2[ri] = 0.5 * var;
    p.tau2[ri] = 0.5 * var;
  }

  double dist_sum = 0.0;
  std::size_t pairs = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j + 1; i < n; ++i) {
      dist_sum += data.distances(i, j);
      ++pairs;
    }
  p.phi = (pairs > 0 && dist_sum > 0.0) ? dist_sum / static_cast<double>(pairs) / 3.0 : 1.0;

  p.rho.resize(static_cast<Eigen::Index>(m * (m - 1) / 2));
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      const Eigen::VectorXd ea = resid.col(static_cast<Eigen::Index>(a)).array() - resid.col(static_cast<Eigen::Index>(a)).mean();
      const Eigen::VectorXd eb = resid.col(static_cast<Eigen::Index>(b)).array() - resid.col(static_cast<Eigen::Index>(b)).mean();
      const double c = ea.dot(eb) / std::sqrt(ea.squaredNorm() * eb.squaredNorm());
      p.rho[static_cast<Eigen::Index>(rho_index(a, b, m))] = std::clamp(c, -0.95, 0.95);
    }
  // Clamping can break positive definiteness for m > 2; shrink toward identity.
  for (int k = 0; k < 100 && m > 2; ++k) {
    Eigen::LLT<Eigen::MatrixXd> llt(p.nugget_correlation());
    if (llt.info() == Eigen::Success) break;
    p.rho *= 0.9;
  }
  return p;
}

namespace {

optim::Objective negative_profile(const ModelData& data) {
  const std::size_t m = data.components();
  return [&data, m](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    try {
      const auto ev = evaluate_profile(CovarianceParams::from_vector(x, m), data, true);
      grad = -ev.score;
      return -ev.loglik;
    } catch (const NumericError&) {
    } catch (const std::domain_error&) {
    }
    grad.setZero(x.size());
    return kInf;
  };
}

// Half the distance to the edge of the parameter space: variances and phi
// stay positive. With `through_rho` the cross-correlations are left free.
Eigen::VectorXd stencil_limits(const Eigen::VectorXd& lambda, std::size_t m, bool through_rho) {
  Eigen::VectorXd lim(lambda.size());
  for (Eigen::Index q = 0; q < lambda.size(); ++q) {
    if (q <= static_cast<Eigen::Index>(2 * m))
      lim[q] = 0.5 * lambda[q];
    else
      lim[q] = through_rho ? kInf : 0.5 * (1.0 - std::abs(lambda[q]));
  }
  return lim;
}

// Profile log-likelihood on its analytic continuation in rho: Sigma is linear
// in rho and stays positive definite slightly past |rho| = 1 whenever the
// spatial term dominates, so the curvature at a boundary estimate is defined.
double continued_profile(const Eigen::VectorXd& v, const ModelData& data) {
  const std::size_t m = data.components();
  const CovarianceParams p = CovarianceParams::from_vector(v, m);
  if ((p.sigma2.array() < 0.0).any() || (p.tau2.array() < 0.0).any() || !(p.phi > 0.0)) return kNaN;
  try {
    const Eigen::MatrixXd spatial = kernels::correlation_matrix(data.distances, p.phi, data.family);
    const Eigen::MatrixXd t = nugget_coefficients(p);
    const BlockCovariance sigma(kernels::assemble_blocks(spatial, spatial_coefficients(p), &t));
    const GlsResult g = gls_beta(sigma, data.design_matrix, data.response);
    return gaussian_loglik(sigma, data.response - data.design_matrix * g.beta);
  } catch (const NumericError&) {
  } catch (const std::domain_error&) {
  }
  return kNaN;
}

}  // namespace

Eigen::MatrixXd observed_information(const CovarianceParams& cov, const ModelData& data,
                                     const numderiv::RichardsonOptions& options) {
  const std::size_t m = data.components();
  const Eigen::VectorXd x = cov.to_vector();
  auto f = [&data](const Eigen::VectorXd& v) { return continued_profile(v, data); };
  Eigen::VectorXd lim = stencil_limits(x, m, true);
  Eigen::MatrixXd h = numderiv::richardson_hessian(f, x, options, &lim);
  if (!h.allFinite()) {
    lim = stencil_limits(x, m, false);
    h = numderiv::richardson_hessian(f, x, options, &lim);
  }
  return -h;
}

FitResult summarize_at(const ModelData& data, const CovarianceParams& cov, const FitOptions& options) {
  FitResult res;
  res.ci_level = options.ci_level;
  res.beta_names = default_beta_names(data.design);
  const BlockCovariance sigma = build_sigma(data.distances, cov, data.family);
  const GlsResult gls = gls_beta(sigma, data.design_matrix, data.response);
  res.params = {gls.beta, cov};
  res.beta_covariance = gls.covariance;
  res.se_beta = gls.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  res.loglik = gaussian_loglik(sigma, data.response - data.design_matrix * gls.beta);

  res.obs_info = observed_information(cov, data, options.richardson);
  const auto q = res.obs_info.rows();
  if (!res.obs_info.allFinite()) {
    res.information_reliable = false;
    res.notes.emplace_back("observed information could not be evaluated; standard errors unavailable");
    res.se_lambda = Eigen::VectorXd::Constant(q, std::numeric_limits<double>::quiet_NaN());
    return res;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(res.obs_info);
  Eigen::MatrixXd lambda_cov;
  if (llt.info() == Eigen::Success) {
    lambda_cov = llt.solve(Eigen::MatrixXd::Identity(q, q));
  } else {
    res.information_reliable = false;
    res.notes.emplace_back("observed information is not positive definite; standard errors from a pseudo-inverse are unreliable");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(res.obs_info);
    const Eigen::VectorXd ev = eig.eigenvalues();
    const double tol = 1e-12 * ev.cwiseAbs().maxCoeff();
    Eigen::VectorXd inv_ev(q);
    for (Eigen::Index k = 0; k < q; ++k) inv_ev[k] = std::abs(ev[k]) > tol ? 1.0 / ev[k] : 0.0;
    lambda_cov = eig.eigenvectors() * inv_ev.asDiagonal() * eig.eigenvectors().transpose();
  }
  res.se_lambda = lambda_cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return res;
}

FitResult fit(const ModelData& data, const FitOptions& options, const std::optional<CovarianceParams>& init) {
  const std::size_t m = data.components();
  const std::size_t p = data.design.columns();
  const std::size_t q = parameter_count(m);
  if (data.sites() * m <= p + q) throw std::domain_error("not enough observations to estimate the model");

  const auto [lo, hi] = parameter_bounds(m, options);
  const optim::Objective objective = negative_profile(data);

  auto start_from = [&](const CovarianceParams& c) {
    Eigen::VectorXd x = c.to_vector().cwiseMax(lo).cwiseMin(hi);
    return optim::lbfgsb_minimize(objective, x, lo, hi, options.optimizer);
  };

  optim::LbfgsbResult opt;
  std::vector<std::string> notes;
  if (init) {
    try {
      opt = start_from(*init);
    } catch (const std::domain_error&) {
      notes.emplace_back("supplied initial values are infeasible; using default initialization");
      opt = start_from(initial_covariance(data));
    }
  } else {
    try {
      opt = start_from(initial_covariance(data));
    } catch (const std::domain_error& e) {
      throw NumericError(std::string("likelihood is not finite at the initial values: ") + e.what());
    }
  }

  const CovarianceParams cov_hat = CovarianceParams::from_vector(opt.x, m);
  FitResult res = summarize_at(data, cov_hat, options);
  res.converged = opt.converged();
  res.iterations = opt.iterations;
  res.evaluations = opt.evaluations;
  res.gradient_norm = opt.projected_gradient_norm;
  res.status = optim::to_string(opt.status);
  res.loglik_trace.reserve(opt.trace.size());
  for (double f : opt.trace) res.loglik_trace.push_back(-f);
  notes.insert(notes.end(), res.notes.begin(), res.notes.end());
  res.notes = std::move(notes);
  if (opt.status == optim::LbfgsbStatus::objective_tolerance && opt.projected_gradient_norm >= options.optimizer.pgtol)
    res.notes.emplace_back("stopped on relative log-likelihood change; projected gradient norm above tolerance");

  if (options.check_flat_phi && res.converged) {
    const auto phi_index = static_cast<Eigen::Index>(2 * m);
    double worst = 0.0;
    bool evaluated = true;
    for (double factor : {0.5, 1.5}) {
      Eigen::VectorXd l2 = lo, h2 = hi, x0 = opt.x;
      x0[phi_index] = opt.x[phi_index] * factor;
      l2[phi_index] = h2[phi_index] = x0[phi_index];
      try {
        const auto sub = optim::lbfgsb_minimize(objective, x0, l2, h2, options.optimizer);
        worst = std::max(worst, 2.0 * (res.loglik + sub.f));
      } catch (const std::domain_error&) {
        evaluated = false;
      }
    }
    if (evaluated && worst < 0.01)
      res.notes.emplace_back("flat likelihood in phi: profile deviance below 0.01 across +-50% of the estimate");
  }
  return res;
}

// -------------------------------------------------------------- profiling

namespace {

// Fritsch-Carlson derivative estimates for monotone cubic Hermite interpolation.
std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> delta(n - 1), d(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) delta[k] = (y[k + 1] - y[k]) / (x[k + 1] - x[k]);
  if (n == 2) {
    d[0] = d[1] = delta[0];
    return d;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (delta[k - 1] * delta[k] <= 0.0) {
      d[k] = 0.0;
    } else {
      const double h0 = x[k] - x[k - 1];
      const double h1 = x[k + 1] - x[k];
      const double w1 = 2.0 * h1 + h0;
      const double w2 = h1 + 2.0 * h0;
      d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
    }
  }
  auto endpoint = [](double h0, double h1, double del0, double del1) {
    double s = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if (s * del0 <= 0.0) s = 0.0;
    else if (del0 * del1 <= 0.0 && std::abs(s) > std::abs(3.0 * del0)) s = 3.0 * del0;
    return s;
  };
  d[0] = endpoint(x[1] - x[0], x[2] - x[1], delta[0], delta[1]);
  d[n - 1] = endpoint(x[n - 1] - x[n - 2], x[n - 2] - x[n - 3], delta[n - 2], delta[n - 3]);
  return d;
}

// Solves H(t) = target on [x[k], x[k+1]] where H is the Hermite cubic.
double hermite_crossing(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& d,
                        std::size_t k, double target) {
  const double h = x[k + 1] - x[k];
  auto eval = [&](double t) {
    const double s = (t - x[k]) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    const double h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s);
    const double h11 = s * s * (s - 1);
    return h00 * y[k] + h10 * h * d[k] + h01 * y[k + 1] + h11 * h * d[k + 1];
  };
  double a = x[k], b = x[k + 1];
  double fa = eval(a) - target;
  const double fb = eval(b) - target;
  if (fa * fb > 0.0) {
    // Interpolant is not bracketing (non-monotone data); fall back to linear.
    return x[k] + (target - y[k]) * h / (y[k + 1] - y[k]);
  }
  for (int it = 0; it < 200 && b - a > 1e-14 * (1.0 + std::abs(a)); ++it) {
    const double mid = 0.5 * (a + b);
    const double fm = eval(mid) - target;
    if ((fm <= 0.0) == (fa <= 0.0)) {
      a = mid;
      fa = fm;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

ProfileTrace profile_likelihood(const LogLikelihood& loglik, const Eigen::VectorXd& mle, std::size_t parameter,
                                const ProfileGrid& grid, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                double level, const optim::LbfgsbOptions& optimizer) {
  const auto p = static_cast<Eigen::Index>(parameter);
  if (p >= mle.size()) throw std::domain_error("profile parameter index out of range");
  if (grid.points < 2 || !(grid.lower < grid.upper)) throw std::domain_error("profile grid needs lower < upper and >= 2 points");
  const double hat = mle[p];
  if (hat < grid.lower || hat > grid.upper) throw std::domain_error("profile grid does not contain the MLE");

  ProfileTrace tr;
  tr.parameter = parameter;
  tr.estimate = hat;
  tr.level = level;
  for (int k = 0; k < grid.points; ++k)
    tr.grid.push_back(grid.lower + (grid.upper - grid.lower) * k / (grid.points - 1));
  tr.grid.push_back(hat);
  std::sort(tr.grid.begin(), tr.grid.end());
  tr.grid.erase(std::unique(tr.grid.begin(), tr.grid.end()), tr.grid.end());
  const auto centre = static_cast<std::size_t>(std::find(tr.grid.begin(), tr.grid.end(), hat) - tr.grid.begin());

  const optim::Objective negative = [&loglik](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double v = loglik(x, g);
    g = -g;
    return std::isfinite(v) ? -v : kInf;
  };
  Eigen::VectorXd scratch(mle.size());
  const double ll_hat = loglik(mle, scratch);

  std::vector<double> ll(tr.grid.size(), -kInf);
  ll[centre] = ll_hat;
  auto sweep = [&](int direction) {
    Eigen::VectorXd warm = mle;
    for (auto k = static_cast<long>(centre) + direction; k >= 0 && k < static_cast<long>(tr.grid.size()); k += direction) {
      const double value = tr.grid[static_cast<std::size_t>(k)];
      Eigen::VectorXd lo = lower, hi = upper;
      lo[p] = hi[p] = value;
      Eigen::VectorXd x0 = warm;
      x0[p] = value;
      optim::LbfgsbResult r;
      try {
        r = optim::lbfgsb_minimize(negative, x0, lo, hi, optimizer);
      } catch (const std::domain_error&) {
        Eigen::VectorXd alt = mle;
        alt[p] = value;
        try {
          r = optim::lbfgsb_minimize(negative, alt, lo, hi, optimizer);
        } catch (const std::domain_error&) {
          continue;
        }
      }
      ll[static_cast<std::size_t>(k)] = -r.f;
      warm = r.x;
    }
  };
  sweep(+1);
  sweep(-1);

  tr.deviance.resize(tr.grid.size());
  std::vector<double> signed_root(tr.grid.size());
  for (std::size_t k = 0; k < tr.grid.size(); ++k) {
    tr.deviance[k] = 2.0 * (ll_hat - ll[k]);
    const double root = std::sqrt(std::max(tr.deviance[k], 0.0));
    signed_root[k] = (tr.grid[k] < hat ? -1.0 : 1.0) * (k == centre ? 0.0 : root);
  }

  const double z = normal_quantile(0.5 + 0.5 * level);
  const std::vector<double> slopes = pchip_slopes(tr.grid, signed_root);
  tr.ci_upper = kInf;
  for (std::size_t k = centre + 1; k < tr.grid.size(); ++k)
    if (signed_root[k] >= z) {
      tr.ci_upper = hermite_crossing(tr.grid, signed_root, slopes, k - 1, z);
      break;
    }
  tr.ci_lower = -kInf;
  for (std::size_t k = centre; k-- > 0;)
    if (signed_root[k] <= -z) {
      tr.ci_lower = hermite_crossing(tr.grid, signed_root, slopes, k, -z);
      break;
    }
  return tr;
}

ProfileTrace profile_trace(const FitResult& fitted, std::size_t parameter, const ProfileGrid& grid,
                           const ModelData& data, const FitOptions& options) {
  if (!fitted.converged) throw std::domain_error("profile_trace requires a converged fit");
  const std::size_t m = data.components();
  const auto [lo, hi] = parameter_bounds(m, options);
  const LogLikelihood ll = [&data, m](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    try {
      const auto ev = evaluate_profile(CovarianceParams::from_vector(x, m), data, true);
      grad = ev.score;
      return ev.loglik;
    } catch (const NumericError&) {
    } catch (const std::domain_error&) {
    }
    grad.setZero(x.size());
    return -kInf;
  };
  ProfileTrace tr = profile_likelihood(ll, fitted.params.cov.to_vector(), parameter, grid, lo, hi, options.ci_level,
                                       options.optimizer);
  tr.name = parameter_names(m).at(parameter);
  return tr;
}

}  // namespace geocomp
