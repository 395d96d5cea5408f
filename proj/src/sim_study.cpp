#include "geocomp/sim_study.hpp"

#include "geocomp/errors.hpp"
#include "geocomp/rng.hpp"
#include "geocomp/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <stdexcept>

namespace geocomp {

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

std::size_t grid_side(std::size_t n) {
  const auto k = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (k < 2 || k * k != n) throw std::domain_error("grid size must be a perfect square k^2 with k >= 2, got " + std::to_string(n));
  return k;
}

}  // namespace

CovarianceParams SimConfig::covariance() const {
  return {sigma.array().square().matrix(), tau.array().square().matrix(), phi, rho};
}

void SimConfig::validate() const {
  const auto m = beta.size();
  if (m < 1) throw std::domain_error("configuration needs at least one alr component");
  if (sigma.size() != m || tau.size() != m || static_cast<std::size_t>(rho.size()) != components() * (components() - 1) / 2)
    throw std::domain_error("configuration parameter sizes are inconsistent");
  if ((sigma.array() < 0.0).any() || (tau.array() < 0.0).any())
    throw std::domain_error("standard deviations must be nonnegative");
  grid_side(n);
  if (replicates < 1) throw std::domain_error("study needs at least one replicate");
  covariance().validate();
}

SimConfig SimConfig::preset(int id, std::size_t n) {
  SimConfig c;
  c.n = n;
  switch (id) {
    case 1:
      c.beta = vec({-0.2, -0.5});
      c.sigma = vec({1.0, 1.5});
      c.tau = vec({0.3, 0.3});
      c.phi = 0.25;
      c.rho = vec({0.9});
      break;
    case 2:
      c.beta = vec({1.0, 1.0});
      c.sigma = vec({1.2, 1.5});
      c.tau = vec({0.9, 0.5});
      c.phi = 0.25;
      c.rho = vec({0.5});
      break;
    case 3:
      c.beta = vec({-0.5, -1.0});
      c.sigma = vec({0.45, 0.13});
      c.tau = vec({0.3, 0.5});
      c.phi = 0.1;
      c.rho = vec({0.0});
      break;
    default:
      throw std::domain_error("unknown preset configuration " + std::to_string(id));
  }
  return c;
}

SpatialLocations make_grid(std::size_t n) {
  const std::size_t k = grid_side(n);
  Eigen::MatrixX2d pts(static_cast<Eigen::Index>(n), 2);
  const double step = 1.0 / static_cast<double>(k - 1);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < k; ++i) {
      const auto row = static_cast<Eigen::Index>(j * k + i);
      pts(row, 0) = static_cast<double>(i) * step;
      pts(row, 1) = static_cast<double>(j) * step;
    }
  return SpatialLocations(pts);
}

Eigen::MatrixXd simulate_alr(const SimConfig& config, std::size_t replicate) {
  config.validate();
  const SpatialLocations locs = make_grid(config.n);
  const Eigen::MatrixXd sigma = assemble_sigma(distance_matrix(locs), config.covariance(), config.family);
  std::mt19937_64 gen = make_stream(config.base_seed, replicate);
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(sigma.rows());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = normal(gen);

  Eigen::VectorXd v;
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() == Eigen::Success) {
    v = llt.matrixL() * z;
  } else {
    // Zero-nugget configurations give a singular Sigma = P^T L D L^T P.
    // LDLT flags rounding-level negative pivots of a semidefinite matrix, so
    // only the pivots themselves are checked.
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
    const double floor = 1e-10 * std::max(1.0, sigma.diagonal().maxCoeff());
    if (!ldlt.vectorD().allFinite() || (ldlt.vectorD().array() < -floor).any())
      throw NumericError("simulation covariance is not positive semi-definite");
    const Eigen::VectorXd d = (ldlt.vectorD().array() < floor).select(0.0, ldlt.vectorD());
    v = d.cwiseSqrt().cwiseProduct(z);
    v = ldlt.matrixL() * v;
    v = ldlt.transpositionsP().transpose() * v;
  }

  const auto n = static_cast<Eigen::Index>(config.n);
  const auto m = static_cast<Eigen::Index>(config.components());
  Eigen::MatrixXd y(n, m);
  for (Eigen::Index r = 0; r < m; ++r) y.col(r) = v.segment(r * n, n).array() + config.beta[r];
  return y;
}

GeoDataset simulate_dataset(const SimConfig& config, std::size_t replicate) {
  const Eigen::MatrixXd y = simulate_alr(config, replicate);
  const std::size_t m = config.components();
  GeoDataset ds{make_grid(config.n), {}, {}, Eigen::MatrixXd(static_cast<Eigen::Index>(config.n), 0), {}};
  ds.compositions.reserve(config.n);
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    ds.compositions.push_back(agl(AlrVector{y.row(i).transpose(), m}));
  for (std::size_t j = 0; j <= m; ++j) ds.part_names.push_back("part" + std::to_string(j + 1));
  return ds;
}

ReplicateRecord run_replicate(const SimConfig& config, std::size_t replicate, const FitOptions& options) {
  ReplicateRecord rec;
  rec.replicate = replicate;
  const std::size_t m = config.components();
  try {
    const ModelData data = make_model_data(make_grid(config.n), simulate_alr(config, replicate),
                                           DesignMatrix::intercept_only(config.n, m), config.family);
    const FitResult fitted = fit(data, options);
    rec.converged = fitted.converged;
    rec.status = fitted.status;
    rec.loglik = fitted.loglik;
    rec.iterations = fitted.iterations;
    rec.sd_scale = fitted.sd_scale();
    rec.variance_scale = fitted.variance_scale();
  } catch (const NumericError& e) {
    rec.status = std::string("numeric failure: ") + e.what();
  }
  return rec;
}

StudySummary summarize_study(const SimConfig& config, std::vector<ReplicateRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const ReplicateRecord& a, const ReplicateRecord& b) { return a.replicate < b.replicate; });
  StudySummary s;
  s.config = config;
  s.replicates = records.size();
  for (const auto& r : records) s.replicates_converged += r.converged ? 1 : 0;
  s.unreliable = static_cast<double>(s.replicates - s.replicates_converged) > 0.2 * static_cast<double>(s.replicates);

  const std::size_t m = config.components();
  const CovarianceParams truth_cov = config.covariance();
  std::vector<double> truth_sd, truth_var;
  for (std::size_t r = 0; r < m; ++r) truth_sd.push_back(config.beta[static_cast<Eigen::Index>(r)]);
  truth_var = truth_sd;
  for (std::size_t r = 0; r < m; ++r) truth_sd.push_back(config.sigma[static_cast<Eigen::Index>(r)]);
  for (std::size_t r = 0; r < m; ++r) truth_sd.push_back(config.tau[static_cast<Eigen::Index>(r)]);
  truth_sd.push_back(config.phi);
  for (Eigen::Index k = 0; k < config.rho.size(); ++k) truth_sd.push_back(config.rho[k]);
  const Eigen::VectorXd lambda = truth_cov.to_vector();
  for (Eigen::Index k = 0; k < lambda.size(); ++k) truth_var.push_back(lambda[k]);

  std::vector<std::string> names_var, names_sd;
  for (std::size_t r = 0; r < m; ++r) names_var.push_back("beta_" + std::to_string(r + 1));
  for (const auto& name : parameter_names(m)) names_var.push_back(name);
  for (const auto& name : names_var) {
    std::string sd = name;
    if (sd.rfind("sigma2_", 0) == 0 || sd.rfind("tau2_", 0) == 0) sd.erase(sd.find('2'), 1);
    names_sd.push_back(sd);
  }

  auto aggregate = [&](const std::vector<double>& truth, const std::vector<std::string>& names, auto pick) {
    std::vector<ParameterSummary> out;
    for (std::size_t k = 0; k < truth.size(); ++k) {
      ParameterSummary p;
      p.truth = truth[k];
      p.name = names[k];
      std::vector<double> est;
      std::size_t covered = 0;
      for (const auto& r : records) {
        if (!r.converged) continue;
        const ParameterEstimate& e = pick(r)[k];
        est.push_back(e.estimate);
        if (std::isfinite(e.lower) && std::isfinite(e.upper)) {
          ++p.used;
          covered += (e.lower <= p.truth && p.truth <= e.upper) ? 1 : 0;
        }
      }
      if (!est.empty()) {
        p.mean_estimate = std::accumulate(est.begin(), est.end(), 0.0) / static_cast<double>(est.size());
        p.bias = p.mean_estimate - p.truth;
        double ss = 0.0;
        for (double e : est) ss += (e - p.mean_estimate) * (e - p.mean_estimate);
        p.spread = est.size() > 1 ? std::sqrt(ss / static_cast<double>(est.size() - 1)) : 0.0;
      }
      p.coverage = p.used > 0 ? static_cast<double>(covered) / static_cast<double>(p.used) : 0.0;
      out.push_back(std::move(p));
    }
    return out;
  };
  s.sd_scale = aggregate(truth_sd, names_sd, [](const ReplicateRecord& r) -> const std::vector<ParameterEstimate>& { return r.sd_scale; });
  s.variance_scale =
      aggregate(truth_var, names_var, [](const ReplicateRecord& r) -> const std::vector<ParameterEstimate>& { return r.variance_scale; });
  s.records = std::move(records);
  return s;
}

StudySummary run_study(const SimConfig& config, const StudyOptions& options) {
  config.validate();
  std::vector<ReplicateRecord> records(config.replicates);
  std::vector<std::exception_ptr> errors(config.replicates);
  const auto count = static_cast<long>(config.replicates);
  const int threads = options.jobs > 0 ? options.jobs : 0;
  auto body = [&](long i) {
    try {
      records[static_cast<std::size_t>(i)] = run_replicate(config, static_cast<std::size_t>(i), options.fit);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  };
  if (threads > 0) {
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (long i = 0; i < count; ++i) body(i);
  } else {
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < count; ++i) body(i);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return summarize_study(config, std::move(records));
}

}  // namespace geocomp
