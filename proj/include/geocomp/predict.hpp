#pragma once

// ALN-kriging: per-site conditional Gaussian laws on the alr scale and their
// back-transformation to the simplex by Gauss-Hermite quadrature or Monte Carlo.

#include "geocomp/gauss_hermite.hpp"
#include "geocomp/mle.hpp"
#include "geocomp/simplex.hpp"
#include "geocomp/spatial_cov.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace geocomp {

struct ConditionalLaw {
  AlrVector mu;
  Eigen::MatrixXd sigma;
  /// R with R R^T = sigma. Lower Cholesky factor when sigma is positive
  /// definite, otherwise V sqrt(Lambda) from the eigendecomposition.
  Eigen::MatrixXd chol;
};

/// Symmetrizes `sigma`, clips eigenvalues in (-floor, 0) to zero and factors.
/// `floor` is 1e-10 scaled by max(1, largest diagonal entry). Throws
/// NumericError for anything more negative.
ConditionalLaw make_conditional_law(AlrVector mu, Eigen::MatrixXd sigma);

/// Design rows for the prediction sites: one n0 x p_r block per component.
/// When absent the model must be intercept-only.
using NewSiteDesign = std::optional<DesignMatrix>;

struct ConditionalOptions {
  /// Denominator index of the back-transform; defaults to the last part.
  std::optional<std::size_t> denominator;
  /// Include the nugget of the new site in Cov(Y0, Y0).
  bool include_nugget = true;
  /// 0 uses the OpenMP default.
  int jobs = 0;
};

/// Plug-in conditional law at each new site given all observations.
std::vector<ConditionalLaw> conditional_gaussian(const ModelParams& params, const ModelData& data,
                                                 const SpatialLocations& new_sites,
                                                 const NewSiteDesign& new_design = std::nullopt,
                                                 const ConditionalOptions& options = {});
/// Same, requiring a converged fit.
std::vector<ConditionalLaw> conditional_gaussian(const FitResult& fitted, const ModelData& data,
                                                 const SpatialLocations& new_sites,
                                                 const NewSiteDesign& new_design = std::nullopt,
                                                 const ConditionalOptions& options = {});

struct GhExpectation {
  Composition mean;
  /// |sum of the unnormalized quadrature parts - 1|.
  double defect = 0.0;
};

/// Tensor-product rule over the B-1 alr dimensions, renormalized.
GhExpectation expected_composition_gh_detail(const ConditionalLaw& law, const GaussHermiteRule& rule);
Composition expected_composition_gh(const ConditionalLaw& law, const GaussHermiteRule& rule);

struct PredictiveSimulation {
  /// draws x B, one composition per row; empty when samples are not kept.
  Eigen::MatrixXd samples;
  Composition mean;
  /// Monte Carlo standard error of each part of the mean.
  Eigen::VectorXd mean_se;
  std::vector<double> levels;
  /// Part-wise empirical quantiles (linear interpolation between order
  /// statistics), one vector of B values per level. Not renormalized.
  std::vector<Eigen::VectorXd> quantiles;
};

inline std::span<const double> default_quantile_levels() {
  static constexpr double levels[] = {0.05, 0.95};
  return levels;
}

/// Draws mu + R z, z ~ N(0, I), back-transformed with agl.
PredictiveSimulation simulate_predictive(const ConditionalLaw& law, std::size_t draws, std::uint64_t seed,
                                         std::span<const double> levels = default_quantile_levels(),
                                         bool keep_samples = true);

/// Empirical quantile with linear interpolation between order statistics
/// (h = (n-1)p); `sorted` must be ascending.
double interpolated_quantile(std::span<const double> sorted, double p);

struct GridSpec {
  int nx = 50;
  int ny = 50;
  double xmin = 0.0, ymin = 0.0, xmax = 1.0, ymax = 1.0;

  /// nx * ny points, x varying fastest.
  SpatialLocations locations() const;
  /// Grid over the bounding box of `locs`.
  static GridSpec bounding(const SpatialLocations& locs, int nx, int ny);
};

struct PredictOptions {
  int gh_points = 20;
  /// 0 disables Monte Carlo.
  std::size_t mc_samples = 10000;
  std::uint64_t seed = 0;
  std::vector<double> quantile_levels{0.05, 0.95};
  ConditionalOptions conditional{};
};

struct CompositionPrediction {
  Eigen::Vector2d site;
  Composition mean_gh;
  std::optional<Composition> mean_mc;
  Eigen::VectorXd mc_se;
  std::vector<double> levels;
  std::vector<Eigen::VectorXd> quantiles;
  std::size_t mc_samples_used = 0;
  double gh_defect = 0.0;
};

struct GridPrediction {
  std::vector<CompositionPrediction> sites;
  std::vector<std::string> warnings;
};

/// Per-site predictions; site i uses the random stream (seed, i). On the first
/// site the rule with K + 5 points is also evaluated and a warning is added
/// when the means differ by more than 1e-5.
GridPrediction predict_sites(const ModelParams& params, const ModelData& data, const SpatialLocations& sites,
                             const NewSiteDesign& new_design, const PredictOptions& options);
GridPrediction predict_grid(const FitResult& fitted, const ModelData& data, const GridSpec& grid,
                            const PredictOptions& options);

}  // namespace geocomp
