#pragma once

// Likelihood machinery for the geostatistical compositional model: GLS
// coefficients, the Gaussian log-likelihood on the stacked alr response, its
// profile over beta, the analytic score, box-constrained maximization,
// Richardson observed information and Wald / profile-deviance intervals.

#include "geocomp/correlation.hpp"
#include "geocomp/lbfgsb.hpp"
#include "geocomp/numderiv.hpp"
#include "geocomp/simplex.hpp"
#include "geocomp/spatial_cov.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace geocomp {

/// Block-diagonal design: one n x p_r block per transformed component.
class DesignMatrix {
 public:
  /// Throws std::domain_error for mismatched row counts or empty blocks.
  /// Rank is only checked where a fit needs it (make_model_data), so a
  /// single prediction row is a valid design.
  explicit DesignMatrix(std::vector<Eigen::MatrixXd> blocks);

  static DesignMatrix intercept_only(std::size_t sites, std::size_t components);
  /// Each component gets [1, covariates].
  static DesignMatrix shared_covariates(const Eigen::MatrixXd& covariates, std::size_t components);

  const std::vector<Eigen::MatrixXd>& blocks() const { return blocks_; }
  std::size_t components() const { return blocks_.size(); }
  std::size_t sites() const { return static_cast<std::size_t>(blocks_.front().rows()); }
  /// P = sum of p_r.
  std::size_t columns() const;
  /// n(B-1) x P block-diagonal matrix, component-major rows.
  Eigen::MatrixXd assembled() const;
  /// Throws RankError if any block lacks full column rank.
  void require_full_rank() const;

 private:
  std::vector<Eigen::MatrixXd> blocks_;
};

/// Locations, raw compositions and optional covariates as read from disk.
struct GeoDataset {
  SpatialLocations locations;
  std::vector<Composition> compositions;
  std::vector<std::string> part_names;
  /// n x c, possibly with zero columns.
  Eigen::MatrixXd covariates;
  std::vector<std::string> covariate_names;

  std::size_t sites() const { return compositions.size(); }
  std::size_t parts() const { return part_names.size(); }
};

/// Everything the likelihood needs, with the alr response stacked
/// component-major and distances precomputed.
struct ModelData {
  SpatialLocations locations;
  Eigen::MatrixXd distances;
  Eigen::VectorXd response;
  DesignMatrix design;
  Eigen::MatrixXd design_matrix;
  CorrelationFamily family;

  std::size_t sites() const { return locations.size(); }
  std::size_t components() const { return design.components(); }
};

/// `alr_values` is n x (B-1). Throws RankError if a design block lacks full column rank.
ModelData make_model_data(SpatialLocations locations, const Eigen::MatrixXd& alr_values, DesignMatrix design,
                          CorrelationFamily family);
/// alr against `denominator` for every site; intercept plus the dataset's covariates for every component.
ModelData make_model_data(const GeoDataset& data, std::size_t denominator, CorrelationFamily family);

struct ModelParams {
  Eigen::VectorXd beta;
  CovarianceParams cov;
};

struct GlsResult {
  Eigen::VectorXd beta;
  /// (D^T Sigma^{-1} D)^{-1}
  Eigen::MatrixXd covariance;
};

GlsResult gls_beta(const BlockCovariance& sigma, const Eigen::MatrixXd& design, const Eigen::VectorXd& y);
GlsResult gls_beta(const BlockCovariance& sigma, const DesignMatrix& design, const Eigen::VectorXd& y);

double log_lik(const ModelParams& params, const ModelData& data);
double profile_loglik(const CovarianceParams& cov, const ModelData& data);
/// d profile_loglik / d lambda.
Eigen::VectorXd score(const CovarianceParams& cov, const ModelData& data);

struct ProfileEvaluation {
  double loglik = 0.0;
  Eigen::VectorXd beta;
  Eigen::VectorXd score;  // empty unless requested
};
ProfileEvaluation evaluate_profile(const CovarianceParams& cov, const ModelData& data, bool with_score);

struct FitOptions {
  double ci_level = 0.95;
  optim::LbfgsbOptions optimizer{};
  numderiv::RichardsonOptions richardson{};
  double variance_floor = 1e-8;
  double rho_margin = 1e-6;
  /// Re-maximize at 0.5 and 1.5 times phi-hat to detect a flat range profile.
  bool check_flat_phi = true;
};

struct ParameterEstimate {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct FitResult {
  ModelParams params;
  double loglik = 0.0;
  Eigen::MatrixXd beta_covariance;
  Eigen::VectorXd se_beta;
  Eigen::VectorXd se_lambda;
  Eigen::MatrixXd obs_info;
  bool information_reliable = true;
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  double gradient_norm = 0.0;
  std::string status;
  std::vector<std::string> notes;
  double ci_level = 0.95;
  /// Fisher information used for beta.
  std::string beta_information = "D^T Sigma^-1 D";
  std::vector<std::string> beta_names;
  std::vector<double> loglik_trace;

  std::size_t components() const { return params.cov.components(); }
  /// beta..., sigma2..., tau2..., phi, rho... with Wald intervals.
  std::vector<ParameterEstimate> variance_scale() const;
  /// beta..., sigma_r..., tau_r..., phi, rho... (standard-deviation scale,
  /// delta-method SEs), the layout of a conventional results table.
  std::vector<ParameterEstimate> sd_scale() const;
};

double normal_quantile(double p);

struct Interval {
  double lower;
  double upper;
};
Interval wald_interval(double estimate, double se, double level = 0.95);

/// Bounds on lambda used by fit(): sigma2, tau2, phi >= floor; rho within margin of +-1.
std::pair<Eigen::VectorXd, Eigen::VectorXd> parameter_bounds(std::size_t components, const FitOptions& options = {});

/// OLS-based starting values (see README for the recipe).
/// Throws RankError when a component is constant.
CovarianceParams initial_covariance(const ModelData& data);

FitResult fit(const ModelData& data, const FitOptions& options = {},
              const std::optional<CovarianceParams>& init = std::nullopt);

/// Negative Richardson Hessian of profile_loglik at `cov`; stencils are kept
/// strictly inside the parameter space.
Eigen::MatrixXd observed_information(const CovarianceParams& cov, const ModelData& data,
                                     const numderiv::RichardsonOptions& options = {});

/// Rebuilds the derived quantities of a fit (beta, SEs, intervals) at given
/// covariance parameters without re-estimation.
FitResult summarize_at(const ModelData& data, const CovarianceParams& cov, const FitOptions& options = {});

struct ProfileGrid {
  double lower = 0.0;
  double upper = 0.0;
  int points = 30;
};

struct ProfileTrace {
  std::size_t parameter = 0;
  std::string name;
  double estimate = 0.0;
  std::vector<double> grid;
  std::vector<double> deviance;
  double level = 0.95;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
};

/// Log-likelihood with gradient; returns -inf outside the model's domain.
using LogLikelihood = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

/// Profile deviance of coordinate `parameter` of a generic log-likelihood.
/// The grid is linspace(lower, upper, points) with the MLE inserted; the
/// remaining coordinates are re-maximized at every grid value, warm-started
/// outward from the MLE. CI endpoints are where the signed root deviance
/// crosses the normal quantile, by monotone cubic interpolation; an endpoint
/// is +-inf when no crossing occurs within the grid.
ProfileTrace profile_likelihood(const LogLikelihood& loglik, const Eigen::VectorXd& mle, std::size_t parameter,
                                const ProfileGrid& grid, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                double level = 0.95, const optim::LbfgsbOptions& optimizer = {});

ProfileTrace profile_trace(const FitResult& fitted, std::size_t parameter, const ProfileGrid& grid,
                           const ModelData& data, const FitOptions& options = {});

}  // namespace geocomp
