#pragma once

// Limited-memory BFGS for box-constrained minimization (Byrd, Lu, Nocedal &
// Zhu): generalized Cauchy point, direct primal subspace minimization over
// the free variables, and a monotone backtracking line search.
//
// The objective may return +inf (or NaN) to signal an infeasible point; the
// line search then backtracks. Variables with lower == upper are held fixed.

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace geocomp::optim {

struct LbfgsbOptions {
  int memory = 10;
  int max_iterations = 500;
  /// Stop when the projected-gradient infinity norm falls below this.
  double pgtol = 1e-5;
  /// Stop when (f_k - f_{k+1}) / max(|f_k|, |f_{k+1}|, 1) falls below this.
  double rel_ftol = 1e-10;
  int max_line_search = 40;
};

enum class LbfgsbStatus { gradient_tolerance, objective_tolerance, max_iterations, line_search_failure };

std::string to_string(LbfgsbStatus status);

struct LbfgsbResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  double projected_gradient_norm = 0.0;
  LbfgsbStatus status = LbfgsbStatus::max_iterations;
  /// Objective after each accepted iteration, starting with f(x0).
  std::vector<double> trace;

  bool converged() const {
    return status == LbfgsbStatus::gradient_tolerance || status == LbfgsbStatus::objective_tolerance;
  }
};

/// f(x, grad) returns the objective and writes the gradient into `grad`.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

/// Minimizes f over lower <= x <= upper starting from the projection of x0.
/// Infinite bounds are allowed. Throws std::domain_error if f(x0) is not finite.
LbfgsbResult lbfgsb_minimize(const Objective& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, const LbfgsbOptions& options = {});

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lower,
                               const Eigen::VectorXd& upper);

}  // namespace geocomp::optim
