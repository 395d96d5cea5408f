#include "geocomp/simplex.hpp"

#include "geocomp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace geocomp {

namespace {

constexpr double kSumTolerance = 1e-12;

void renormalize(std::span<double> parts) {
  const double s = std::accumulate(parts.begin(), parts.end(), 0.0);
  for (double& p : parts) p /= s;
}

}  // namespace

Composition::Composition(std::vector<double> parts, std::size_t denominator)
    : parts_(std::move(parts)), denominator_(denominator) {
  if (parts_.size() < 2) throw std::domain_error("composition needs at least two parts");
  if (denominator_ >= parts_.size())
    throw std::domain_error("denominator index " + std::to_string(denominator_) + " out of range");
  double sum = 0.0;
  for (std::size_t j = 0; j < parts_.size(); ++j) {
    if (!(parts_[j] > 0.0) || !std::isfinite(parts_[j]))
      throw std::domain_error("composition part " + std::to_string(j) + " is not strictly positive");
    sum += parts_[j];
  }
  if (std::abs(sum - 1.0) > kSumTolerance)
    throw std::domain_error("composition parts sum to " + std::to_string(sum) + ", expected 1");
}

Eigen::VectorXd Composition::to_eigen() const {
  return Eigen::Map<const Eigen::VectorXd>(parts_.data(), static_cast<Eigen::Index>(parts_.size()));
}

Composition closure(std::span<const double> raw, std::size_t denominator) {
  if (raw.size() < 2) throw std::domain_error("composition needs at least two parts");
  std::vector<double> parts(raw.begin(), raw.end());
  for (std::size_t j = 0; j < parts.size(); ++j) {
    if (!(parts[j] > 0.0) || !std::isfinite(parts[j]))
      throw std::domain_error("raw part " + std::to_string(j) + " is not strictly positive");
  }
  renormalize(parts);
  renormalize(parts);
  return Composition(std::move(parts), denominator);
}

Composition closure(std::span<const double> raw) { return closure(raw, raw.size() - 1); }

AlrVector alr(const Composition& x) {
  const std::size_t d = x.denominator();
  AlrVector y;
  y.denominator = d;
  y.values.resize(static_cast<Eigen::Index>(x.size() - 1));
  const double log_den = std::log(x[d]);
  Eigen::Index k = 0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (j == d) continue;
    y.values[k++] = std::log(x[j]) - log_den;
  }
  return y;
}

void agl_into(std::span<const double> y, std::size_t denominator, std::span<double> out) {
  const std::size_t parts = y.size() + 1;
  double shift = 0.0;
  for (double v : y) shift = std::max(shift, v);
  double sum = 0.0;
  std::size_t k = 0;
  for (std::size_t j = 0; j < parts; ++j) {
    const double e = (j == denominator) ? std::exp(-shift) : std::exp(y[k++] - shift);
    out[j] = e;
    sum += e;
  }
  for (std::size_t j = 0; j < parts; ++j) out[j] /= sum;
  renormalize(out.first(parts));
}

Composition agl(const AlrVector& y) {
  std::vector<double> parts(y.parts());
  agl_into(std::span<const double>(y.values.data(), static_cast<std::size_t>(y.values.size())),
           y.denominator, parts);
  return Composition(std::move(parts), y.denominator);
}

Composition geometric_mean(std::span<const Composition> xs) {
  if (xs.empty()) throw std::domain_error("geometric mean of an empty list");
  const std::size_t parts = xs.front().size();
  const std::size_t d = xs.front().denominator();
  std::vector<double> log_sum(parts, 0.0);
  for (const auto& x : xs) {
    if (x.size() != parts || x.denominator() != d)
      throw std::domain_error("geometric mean needs compositions of equal shape and denominator");
    for (std::size_t j = 0; j < parts; ++j) log_sum[j] += std::log(x[j]);
  }
  // Subtracting the largest log mean keeps exp() away from underflow.
  const double n = static_cast<double>(xs.size());
  const double top = *std::max_element(log_sum.begin(), log_sum.end()) / n;
  std::vector<double> g(parts);
  for (std::size_t j = 0; j < parts; ++j) g[j] = std::exp(log_sum[j] / n - top);
  return closure(g, d);
}

std::size_t most_abundant_part(std::span<const Composition> xs) {
  const Composition g = geometric_mean(xs);
  const auto p = g.parts();
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

double aln_log_density(const Composition& x, const AlrVector& mu, const Eigen::MatrixXd& sigma) {
  const Eigen::Index m = static_cast<Eigen::Index>(x.size()) - 1;
  if (mu.values.size() != m || sigma.rows() != m || sigma.cols() != m)
    throw std::domain_error("aln_log_density: dimension mismatch");
  if (mu.denominator != x.denominator())
    throw std::domain_error("aln_log_density: denominator mismatch between x and mu");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw NumericError("aln_log_density: sigma is not positive definite");
  const Eigen::VectorXd r = alr(x).values - mu.values;
  const Eigen::VectorXd z = llt.matrixL().solve(r);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  double log_jacobian = 0.0;
  for (double p : x.parts()) log_jacobian += std::log(p);
  return -0.5 * static_cast<double>(m) * std::log(2.0 * std::numbers::pi) - 0.5 * log_det -
         0.5 * z.squaredNorm() - log_jacobian;
}

}  // namespace geocomp
