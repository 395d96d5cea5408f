#pragma once

// Richardson-extrapolated central differences.
//
// Each stage halves (by `reduction`) the step of a central difference; since
// central differences have an error expansion in even powers of h, stage j
// of the extrapolation table eliminates the h^{2j} term.

#include <Eigen/Dense>

#include <functional>

namespace geocomp::numderiv {

struct RichardsonOptions {
  /// Initial step as a fraction of |x_i|.
  double relative_step = 1e-2;
  /// Initial step used when |x_i| is below `zero_tolerance`.
  double zero_step = 1e-4;
  double zero_tolerance = 1e-8;
  int stages = 4;
  double reduction = 2.0;
};

using ScalarFunction = std::function<double(const Eigen::VectorXd&)>;

/// Initial steps for x; when `max_step` is given each step is additionally
/// capped by it (used to keep stencils inside a feasible region).
Eigen::VectorXd initial_steps(const Eigen::VectorXd& x, const RichardsonOptions& options,
                              const Eigen::VectorXd* max_step = nullptr);

Eigen::VectorXd richardson_gradient(const ScalarFunction& f, const Eigen::VectorXd& x,
                                    const RichardsonOptions& options = {}, const Eigen::VectorXd* max_step = nullptr);

/// Hessian of f at x; returned symmetrized as (H + H^T)/2.
Eigen::MatrixXd richardson_hessian(const ScalarFunction& f, const Eigen::VectorXd& x,
                                   const RichardsonOptions& options = {}, const Eigen::VectorXd* max_step = nullptr);

}  // namespace geocomp::numderiv
