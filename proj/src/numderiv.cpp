#include "geocomp/numderiv.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace geocomp::numderiv {

namespace {

// In-place Neville-style table: estimates[k] was computed with step h / v^k.
double extrapolate(std::vector<double> estimates, double reduction) {
  const std::size_t stages = estimates.size();
  for (std::size_t j = 1; j < stages; ++j) {
    const double factor = std::pow(reduction, 2.0 * static_cast<double>(j));
    for (std::size_t k = 0; k + j < stages; ++k)
      estimates[k] = (factor * estimates[k + 1] - estimates[k]) / (factor - 1.0);
  }
  return estimates.front();
}

void check(const RichardsonOptions& options) {
  if (options.stages < 1) throw std::domain_error("Richardson extrapolation needs at least one stage");
  if (!(options.reduction > 1.0)) throw std::domain_error("step reduction factor must exceed 1");
}

}  // namespace

Eigen::VectorXd initial_steps(const Eigen::VectorXd& x, const RichardsonOptions& options,
                              const Eigen::VectorXd* max_step) {
  Eigen::VectorXd h(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    h[i] = std::abs(x[i]) < options.zero_tolerance ? options.zero_step : options.relative_step * std::abs(x[i]);
    if (max_step) h[i] = std::min(h[i], (*max_step)[i]);
  }
  return h;
}

Eigen::VectorXd richardson_gradient(const ScalarFunction& f, const Eigen::VectorXd& x,
                                    const RichardsonOptions& options, const Eigen::VectorXd* max_step) {
  check(options);
  const Eigen::VectorXd h0 = initial_steps(x, options, max_step);
  Eigen::VectorXd grad(x.size());
  std::vector<double> est(static_cast<std::size_t>(options.stages));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double h = h0[i];
    for (auto& e : est) {
      Eigen::VectorXd xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      e = (f(xp) - f(xm)) / (2.0 * h);
      h /= options.reduction;
    }
    grad[i] = extrapolate(est, options.reduction);
  }
  return grad;
}

Eigen::MatrixXd richardson_hessian(const ScalarFunction& f, const Eigen::VectorXd& x,
                                   const RichardsonOptions& options, const Eigen::VectorXd* max_step) {
  check(options);
  const Eigen::Index n = x.size();
  const Eigen::VectorXd h0 = initial_steps(x, options, max_step);
  const double f0 = f(x);
  const auto stages = static_cast<std::size_t>(options.stages);
  Eigen::MatrixXd hess(n, n);
  std::vector<double> est(stages);

  for (Eigen::Index i = 0; i < n; ++i) {
    double hi = h0[i];
    for (std::size_t k = 0; k < stages; ++k) {
      Eigen::VectorXd xp = x, xm = x;
      xp[i] += hi;
      xm[i] -= hi;
      est[k] = (f(xp) - 2.0 * f0 + f(xm)) / (hi * hi);
      hi /= options.reduction;
    }
    hess(i, i) = extrapolate(est, options.reduction);
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double hi = h0[i];
      double hj = h0[j];
      for (std::size_t k = 0; k < stages; ++k) {
        Eigen::VectorXd pp = x, pm = x, mp = x, mm = x;
        pp[i] += hi; pp[j] += hj;
        pm[i] += hi; pm[j] -= hj;
        mp[i] -= hi; mp[j] += hj;
        mm[i] -= hi; mm[j] -= hj;
        est[k] = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * hi * hj);
        hi /= options.reduction;
        hj /= options.reduction;
      }
      hess(i, j) = extrapolate(est, options.reduction);
      hess(j, i) = hess(i, j);
    }
  }
  return 0.5 * (hess + hess.transpose());
}

}  // namespace geocomp::numderiv
