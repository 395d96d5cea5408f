#include "geocomp/predict.hpp"

#include "geocomp/errors.hpp"
#include "geocomp/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <random>
#include <stdexcept>

namespace geocomp {

ConditionalLaw make_conditional_law(AlrVector mu, Eigen::MatrixXd sigma) {
  const auto m = sigma.rows();
  if (sigma.cols() != m || mu.values.size() != m) throw std::domain_error("conditional law dimension mismatch");
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  const double floor = 1e-10 * std::max(1.0, sigma.diagonal().cwiseAbs().maxCoeff());

  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0.0) {
    Eigen::MatrixXd chol = llt.matrixL();
    return {std::move(mu), std::move(sigma), std::move(chol)};
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  Eigen::VectorXd ev = eig.eigenvalues();
  if (ev.minCoeff() <= -floor)
    throw NumericError("conditional covariance is not positive semi-definite (eigenvalue " +
                       std::to_string(ev.minCoeff()) + ")");
  ev = ev.cwiseMax(0.0);
  const Eigen::MatrixXd root = eig.eigenvectors() * ev.cwiseSqrt().asDiagonal();
  Eigen::MatrixXd repaired = root * root.transpose();
  return {std::move(mu), 0.5 * (repaired + repaired.transpose()), root};
}

// ------------------------------------------------------------ conditioning

namespace {

Eigen::VectorXd new_site_mean(const ModelParams& params, const ModelData& data, const NewSiteDesign& design,
                              Eigen::Index site) {
  const std::size_t m = data.components();
  Eigen::VectorXd mean(static_cast<Eigen::Index>(m));
  Eigen::Index offset = 0;
  for (std::size_t r = 0; r < m; ++r) {
    const auto p = data.design.blocks()[r].cols();
    const auto beta_r = params.beta.segment(offset, p);
    if (design)
      mean[static_cast<Eigen::Index>(r)] = design->blocks()[r].row(site).dot(beta_r);
    else
      mean[static_cast<Eigen::Index>(r)] = beta_r[0];
    offset += p;
  }
  return mean;
}

void check_new_design(const ModelData& data, const NewSiteDesign& design, std::size_t sites) {
  if (design) {
    if (design->components() != data.components() || design->sites() != sites)
      throw std::domain_error("new-site design has the wrong shape");
    for (std::size_t r = 0; r < data.components(); ++r)
      if (design->blocks()[r].cols() != data.design.blocks()[r].cols())
        throw std::domain_error("new-site design columns differ from the fitted design");
    return;
  }
  for (const auto& b : data.design.blocks())
    if (b.cols() != 1 || !(b.array() == 1.0).all())
      throw std::domain_error("model has covariates; a design for the new sites is required");
}

template <class Body>
void for_each_site(std::size_t count, int jobs, Body body) {
  std::vector<std::exception_ptr> errors(count);
  const int threads = jobs > 0 ? jobs : 0;
  const auto n = static_cast<long>(count);
  if (threads > 0) {
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (long i = 0; i < n; ++i) {
      try {
        body(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  } else {
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
      try {
        body(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

std::vector<ConditionalLaw> conditional_gaussian(const ModelParams& params, const ModelData& data,
                                                 const SpatialLocations& new_sites, const NewSiteDesign& new_design,
                                                 const ConditionalOptions& options) {
  if (new_sites.size() == 0) throw std::domain_error("no prediction sites");
  if (static_cast<std::size_t>(params.beta.size()) != data.design.columns())
    throw std::domain_error("beta does not match the design");
  check_new_design(data, new_design, new_sites.size());
  const std::size_t m = data.components();
  const std::size_t denominator = options.denominator.value_or(m);
  if (denominator > m) throw std::domain_error("denominator index out of range");

  const BlockCovariance sigma = build_sigma(data.distances, params.cov, data.family);
  const Eigen::VectorXd weights = sigma.solve(data.response - data.design_matrix * params.beta);

  std::vector<ConditionalLaw> laws(new_sites.size());
  for_each_site(new_sites.size(), options.jobs, [&](std::size_t k) {
    const SpatialLocations one = new_sites.subset({k});
    const CrossCovariance cc = cross_sigma(data.locations, one, params.cov, data.family, options.include_nugget);
    const Eigen::MatrixXd v = sigma.whiten(cc.cross.transpose());
    AlrVector mu{new_site_mean(params, data, new_design, static_cast<Eigen::Index>(k)) + cc.cross * weights,
                 denominator};
    laws[k] = make_conditional_law(std::move(mu), cc.new_block - v.transpose() * v);
  });
  return laws;
}

std::vector<ConditionalLaw> conditional_gaussian(const FitResult& fitted, const ModelData& data,
                                                 const SpatialLocations& new_sites, const NewSiteDesign& new_design,
                                                 const ConditionalOptions& options) {
  if (!fitted.converged) throw std::domain_error("prediction requires a converged fit");
  return conditional_gaussian(fitted.params, data, new_sites, new_design, options);
}

// ------------------------------------------------------------- quadrature

GhExpectation expected_composition_gh_detail(const ConditionalLaw& law, const GaussHermiteRule& rule) {
  const auto m = law.mu.values.size();
  const std::size_t parts = static_cast<std::size_t>(m) + 1;
  const std::size_t d = law.mu.denominator;
  std::vector<double> out(parts);

  if (law.chol.isZero(0.0)) {
    agl_into(std::span<const double>(law.mu.values.data(), static_cast<std::size_t>(m)), d, out);
    return {Composition(out, d), 0.0};
  }

  const double norm = std::pow(std::numbers::pi, -0.5 * static_cast<double>(m));
  const Eigen::MatrixXd scaled = std::sqrt(2.0) * law.chol;
  std::vector<double> acc(parts, 0.0);
  std::vector<int> idx(static_cast<std::size_t>(m), 0);
  Eigen::VectorXd g(m), y(m);
  for (;;) {
    double w = norm;
    for (Eigen::Index r = 0; r < m; ++r) {
      g[r] = rule.nodes[idx[static_cast<std::size_t>(r)]];
      w *= rule.weights[idx[static_cast<std::size_t>(r)]];
    }
    y.noalias() = scaled * g;
    y += law.mu.values;
    agl_into(std::span<const double>(y.data(), static_cast<std::size_t>(m)), d, out);
    for (std::size_t j = 0; j < parts; ++j) acc[j] += w * out[j];

    std::size_t r = 0;
    while (r < idx.size() && ++idx[r] == rule.k) idx[r++] = 0;
    if (r == idx.size()) break;
  }
  double total = 0.0;
  for (double a : acc) total += a;
  for (double& a : acc) a /= total;
  // A second pass absorbs the rounding of the first division.
  double again = 0.0;
  for (double a : acc) again += a;
  for (double& a : acc) a /= again;
  return {Composition(std::move(acc), d), std::abs(total - 1.0)};
}

Composition expected_composition_gh(const ConditionalLaw& law, const GaussHermiteRule& rule) {
  return expected_composition_gh_detail(law, rule).mean;
}

// ------------------------------------------------------------ Monte Carlo

double interpolated_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::domain_error("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("quantile level must lie in [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

PredictiveSimulation simulate_predictive(const ConditionalLaw& law, std::size_t draws, std::uint64_t seed,
                                         std::span<const double> levels, bool keep_samples) {
  if (draws < 2) throw std::domain_error("predictive simulation needs at least two draws");
  const auto m = law.mu.values.size();
  const auto parts = m + 1;
  const std::size_t d = law.mu.denominator;

  std::mt19937_64 gen(stream_seed(seed, 0));
  std::normal_distribution<double> normal;
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(draws), parts);
  Eigen::VectorXd z(m), y(m);
  std::vector<double> out(static_cast<std::size_t>(parts));
  for (std::size_t s = 0; s < draws; ++s) {
    for (Eigen::Index r = 0; r < m; ++r) z[r] = normal(gen);
    y.noalias() = law.chol * z;
    y += law.mu.values;
    agl_into(std::span<const double>(y.data(), static_cast<std::size_t>(m)), d, out);
    for (Eigen::Index j = 0; j < parts; ++j) samples(static_cast<Eigen::Index>(s), j) = out[static_cast<std::size_t>(j)];
  }

  const double count = static_cast<double>(draws);
  const Eigen::VectorXd mean = samples.colwise().mean().transpose();
  const Eigen::VectorXd var = (samples.rowwise() - mean.transpose()).colwise().squaredNorm().transpose() / (count - 1.0);
  std::vector<double> closed(mean.data(), mean.data() + parts);
  double total = 0.0;
  for (double v : closed) total += v;
  for (double& v : closed) v /= total;

  PredictiveSimulation sim{Eigen::MatrixXd(), closure(closed, d), (var / count).cwiseSqrt(),
                           std::vector<double>(levels.begin(), levels.end()), {}};
  std::vector<double> column(draws);
  sim.quantiles.assign(levels.size(), Eigen::VectorXd(parts));
  for (Eigen::Index j = 0; j < parts; ++j) {
    for (std::size_t s = 0; s < draws; ++s) column[s] = samples(static_cast<Eigen::Index>(s), j);
    std::sort(column.begin(), column.end());
    for (std::size_t l = 0; l < levels.size(); ++l) sim.quantiles[l][j] = interpolated_quantile(column, levels[l]);
  }
  if (keep_samples) sim.samples = std::move(samples);
  return sim;
}

// ------------------------------------------------------------------- grids

SpatialLocations GridSpec::locations() const {
  if (nx < 1 || ny < 1) throw std::domain_error("grid needs at least one point per axis");
  if (!(xmax >= xmin && ymax >= ymin)) throw std::domain_error("grid bounding box is inverted");
  Eigen::MatrixX2d pts(static_cast<Eigen::Index>(nx) * ny, 2);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Eigen::Index row = static_cast<Eigen::Index>(j) * nx + i;
      pts(row, 0) = nx == 1 ? 0.5 * (xmin + xmax) : xmin + (xmax - xmin) * i / (nx - 1);
      pts(row, 1) = ny == 1 ? 0.5 * (ymin + ymax) : ymin + (ymax - ymin) * j / (ny - 1);
    }
  return SpatialLocations(pts);
}

GridSpec GridSpec::bounding(const SpatialLocations& locs, int nx, int ny) {
  const auto& c = locs.coords();
  return {nx, ny, c.col(0).minCoeff(), c.col(1).minCoeff(), c.col(0).maxCoeff(), c.col(1).maxCoeff()};
}

GridPrediction predict_sites(const ModelParams& params, const ModelData& data, const SpatialLocations& sites,
                             const NewSiteDesign& new_design, const PredictOptions& options) {
  if (options.mc_samples == 1) throw std::domain_error("Monte Carlo needs at least two samples");
  const GaussHermiteRule rule = gauss_hermite_rule(options.gh_points);
  const std::vector<ConditionalLaw> laws = conditional_gaussian(params, data, sites, new_design, options.conditional);

  GridPrediction out;
  {
    const GaussHermiteRule finer = gauss_hermite_rule(std::min(options.gh_points + 5, 100));
    const Composition a = expected_composition_gh(laws.front(), rule);
    const Composition b = expected_composition_gh(laws.front(), finer);
    double diff = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) diff = std::max(diff, std::abs(a[j] - b[j]));
    if (diff > 1e-5)
      out.warnings.push_back("Gauss-Hermite means with " + std::to_string(options.gh_points) + " and " +
                             std::to_string(finer.k) + " points differ by " + std::to_string(diff) +
                             " at the first site; consider more points");
  }

  std::vector<std::optional<CompositionPrediction>> slots(laws.size());
  for_each_site(laws.size(), options.conditional.jobs, [&](std::size_t k) {
    const GhExpectation gh = expected_composition_gh_detail(laws[k], rule);
    CompositionPrediction p{sites.coords().row(static_cast<Eigen::Index>(k)).transpose(), gh.mean, std::nullopt,
                            Eigen::VectorXd(), options.quantile_levels, {}, 0, gh.defect};
    if (options.mc_samples > 0) {
      PredictiveSimulation sim =
          simulate_predictive(laws[k], options.mc_samples, stream_seed(options.seed, k), options.quantile_levels, false);
      p.mean_mc = std::move(sim.mean);
      p.mc_se = std::move(sim.mean_se);
      p.quantiles = std::move(sim.quantiles);
      p.mc_samples_used = options.mc_samples;
    }
    slots[k] = std::move(p);
  });
  out.sites.reserve(slots.size());
  for (auto& s : slots) out.sites.push_back(std::move(*s));
  return out;
}

GridPrediction predict_grid(const FitResult& fitted, const ModelData& data, const GridSpec& grid,
                            const PredictOptions& options) {
  if (!fitted.converged) throw std::domain_error("prediction requires a converged fit");
  return predict_sites(fitted.params, data, grid.locations(), std::nullopt, options);
}

}  // namespace geocomp
