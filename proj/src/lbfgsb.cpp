#include "geocomp/lbfgsb.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace geocomp::optim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Compact limited-memory representation B = theta I - W M W^T.
class CompactMemory {
 public:
  CompactMemory(Eigen::Index n, int capacity) : n_(n), capacity_(capacity) { reset(); }

  void reset() {
    s_.clear();
    y_.clear();
    theta_ = 1.0;
    w_.resize(n_, 0);
    m_.resize(0, 0);
  }

  bool empty() const { return s_.empty(); }
  double theta() const { return theta_; }
  const Eigen::MatrixXd& w() const { return w_; }
  const Eigen::MatrixXd& m() const { return m_; }

  // Returns false (and leaves the memory untouched) when the curvature pair is rejected.
  bool update(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
    const double sy = s.dot(y);
    const double yy = y.squaredNorm();
    if (!(sy > kEps * yy) || !std::isfinite(sy)) return false;
    s_.push_back(s);
    y_.push_back(y);
    if (static_cast<int>(s_.size()) > capacity_) {
      s_.pop_front();
      y_.pop_front();
    }
    theta_ = yy / sy;
    rebuild();
    return true;
  }

 private:
  void rebuild() {
    const auto k = static_cast<Eigen::Index>(s_.size());
    Eigen::MatrixXd s(n_, k), y(n_, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      s.col(j) = s_[static_cast<std::size_t>(j)];
      y.col(j) = y_[static_cast<std::size_t>(j)];
    }
    const Eigen::MatrixXd sy = s.transpose() * y;
    Eigen::MatrixXd middle = Eigen::MatrixXd::Zero(2 * k, 2 * k);
    for (Eigen::Index i = 0; i < k; ++i) {
      middle(i, i) = -sy(i, i);
      for (Eigen::Index j = 0; j < i; ++j) {
        middle(k + i, j) = sy(i, j);  // L
        middle(j, k + i) = sy(i, j);  // L^T
      }
    }
    middle.bottomRightCorner(k, k) = theta_ * (s.transpose() * s);
    m_ = middle.fullPivLu().inverse();
    w_.resize(n_, 2 * k);
    w_.leftCols(k) = y;
    w_.rightCols(k) = theta_ * s;
  }

  Eigen::Index n_;
  int capacity_;
  std::deque<Eigen::VectorXd> s_, y_;
  double theta_ = 1.0;
  Eigen::MatrixXd w_, m_;
};

Eigen::VectorXd project(Eigen::VectorXd x, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

struct CauchyPoint {
  Eigen::VectorXd x;
  Eigen::VectorXd c;  // W^T (x_cp - x) accumulated along the path
};

CauchyPoint generalized_cauchy_point(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lower,
                                     const Eigen::VectorXd& upper, const CompactMemory& mem) {
  const Eigen::Index n = x.size();
  const double theta = mem.theta();
  const Eigen::MatrixXd& w = mem.w();
  const Eigen::MatrixXd& m = mem.m();

  Eigen::VectorXd t(n), d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (g[i] < 0.0)
      t[i] = std::isfinite(upper[i]) ? (x[i] - upper[i]) / g[i] : kInf;
    else if (g[i] > 0.0)
      t[i] = std::isfinite(lower[i]) ? (x[i] - lower[i]) / g[i] : kInf;
    else
      t[i] = kInf;
    d[i] = (t[i] <= 0.0 || g[i] == 0.0) ? 0.0 : -g[i];
    if (t[i] <= 0.0) t[i] = 0.0;
  }

  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < n; ++i)
    if (t[i] > 0.0 && std::isfinite(t[i])) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return t[a] < t[b]; });

  CauchyPoint cp{x, Eigen::VectorXd::Zero(w.cols())};
  Eigen::VectorXd p = w.transpose() * d;
  double fp = -d.squaredNorm();
  double fpp = -theta * fp - p.dot(m * p);
  const double fpp0 = fpp;
  if (fp >= 0.0) return cp;  // d == 0: already stationary
  double dt_min = -fp / fpp;
  double t_old = 0.0;

  for (Eigen::Index b : order) {
    const double dt = t[b] - t_old;
    if (dt_min < dt) break;
    cp.x[b] = d[b] > 0.0 ? upper[b] : lower[b];
    const double zb = cp.x[b] - x[b];
    cp.c += dt * p;
    const double gb = g[b];
    const Eigen::VectorXd wb = w.row(b).transpose();
    fp += dt * fpp + gb * gb + theta * gb * zb - gb * wb.dot(m * cp.c);
    fpp -= theta * gb * gb + 2.0 * gb * wb.dot(m * p) + gb * gb * wb.dot(m * wb);
    fpp = std::max(kEps * fpp0, fpp);
    p += gb * wb;
    d[b] = 0.0;
    dt_min = -fp / fpp;
    t_old = t[b];
    if (fp >= 0.0) {
      dt_min = 0.0;
      break;
    }
  }

  dt_min = std::max(dt_min, 0.0);
  t_old += dt_min;
  for (Eigen::Index i = 0; i < n; ++i)
    if (d[i] != 0.0) cp.x[i] = x[i] + t_old * d[i];
  cp.x = project(cp.x, lower, upper);
  cp.c += dt_min * p;
  return cp;
}

// Direct primal subspace minimization of the quadratic model over the
// variables that are free at the Cauchy point, truncated to stay feasible.
Eigen::VectorXd subspace_minimum(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lower,
                                 const Eigen::VectorXd& upper, const CompactMemory& mem, const CauchyPoint& cp) {
  const Eigen::Index n = x.size();
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < n; ++i)
    if (cp.x[i] > lower[i] && cp.x[i] < upper[i]) free.push_back(i);
  if (free.empty()) return cp.x;

  const double theta = mem.theta();
  const Eigen::MatrixXd& w = mem.w();
  const Eigen::MatrixXd& m = mem.m();
  const auto nf = static_cast<Eigen::Index>(free.size());

  const Eigen::VectorXd full_rc = g + theta * (cp.x - x) - (mem.empty() ? Eigen::VectorXd::Zero(n).eval() : (w * (m * cp.c)).eval());
  Eigen::VectorXd rc(nf);
  Eigen::MatrixXd wz(nf, w.cols());
  for (Eigen::Index k = 0; k < nf; ++k) {
    rc[k] = full_rc[free[static_cast<std::size_t>(k)]];
    wz.row(k) = w.row(free[static_cast<std::size_t>(k)]);
  }

  Eigen::VectorXd du = -rc / theta;
  if (!mem.empty()) {
    Eigen::VectorXd v = m * (wz.transpose() * rc);
    const Eigen::MatrixXd nmat =
        Eigen::MatrixXd::Identity(w.cols(), w.cols()) - (m * (wz.transpose() * wz)) / theta;
    v = nmat.fullPivLu().solve(v);
    du -= wz * v / (theta * theta);
  }

  double alpha = 1.0;
  for (Eigen::Index k = 0; k < nf; ++k) {
    const Eigen::Index i = free[static_cast<std::size_t>(k)];
    if (du[k] > 0.0 && std::isfinite(upper[i])) alpha = std::min(alpha, (upper[i] - cp.x[i]) / du[k]);
    if (du[k] < 0.0 && std::isfinite(lower[i])) alpha = std::min(alpha, (lower[i] - cp.x[i]) / du[k]);
  }
  alpha = std::max(alpha, 0.0);

  Eigen::VectorXd xbar = cp.x;
  for (Eigen::Index k = 0; k < nf; ++k) xbar[free[static_cast<std::size_t>(k)]] += alpha * du[k];
  return project(xbar, lower, upper);
}

}  // namespace

std::string to_string(LbfgsbStatus status) {
  switch (status) {
    case LbfgsbStatus::gradient_tolerance: return "converged: projected gradient below tolerance";
    case LbfgsbStatus::objective_tolerance: return "converged: relative objective change below tolerance";
    case LbfgsbStatus::max_iterations: return "iteration limit reached";
    case LbfgsbStatus::line_search_failure: return "line search failed to find a decrease";
  }
  return "unknown";
}

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lower,
                               const Eigen::VectorXd& upper) {
  double norm = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = std::clamp(x[i] - g[i], lower[i], upper[i]) - x[i];
    norm = std::max(norm, std::abs(step));
  }
  return norm;
}

LbfgsbResult lbfgsb_minimize(const Objective& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper, const LbfgsbOptions& options) {
  const Eigen::Index n = x0.size();
  if (lower.size() != n || upper.size() != n) throw std::domain_error("bound vectors have the wrong length");
  if ((lower.array() > upper.array()).any()) throw std::domain_error("lower bound exceeds upper bound");

  LbfgsbResult res;
  res.x = project(std::move(x0), lower, upper);
  res.gradient = Eigen::VectorXd::Zero(n);
  res.f = f(res.x, res.gradient);
  res.evaluations = 1;
  if (!std::isfinite(res.f) || !res.gradient.allFinite())
    throw std::domain_error("objective is not finite at the starting point");
  res.trace.push_back(res.f);
  res.projected_gradient_norm = projected_gradient_norm(res.x, res.gradient, lower, upper);
  if (res.projected_gradient_norm < options.pgtol) {
    res.status = LbfgsbStatus::gradient_tolerance;
    return res;
  }

  CompactMemory mem(n, options.memory);
  Eigen::VectorXd g_new(n);

  while (res.iterations < options.max_iterations) {
    const CauchyPoint cp = generalized_cauchy_point(res.x, res.gradient, lower, upper, mem);
    const Eigen::VectorXd xbar = subspace_minimum(res.x, res.gradient, lower, upper, mem, cp);
    Eigen::VectorXd dir = xbar - res.x;
    double slope = res.gradient.dot(dir);

    if (!(slope < 0.0)) {
      if (!mem.empty()) {
        mem.reset();
        continue;
      }
      res.status = LbfgsbStatus::line_search_failure;
      return res;
    }

    double step = mem.empty() ? std::min(1.0, 1.0 / dir.norm()) : 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new(n);
    double f_new = 0.0;
    for (int ls = 0; ls < options.max_line_search; ++ls) {
      x_new = project(res.x + step * dir, lower, upper);
      f_new = f(x_new, g_new);
      ++res.evaluations;
      if (std::isnan(f_new)) f_new = kInf;
      if (std::isfinite(f_new) && g_new.allFinite() && f_new <= res.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      double next = 0.5 * step;
      if (std::isfinite(f_new)) {
        // Minimizer of the quadratic through f(0), f'(0) and f(step), safeguarded.
        const double denom = 2.0 * (f_new - res.f - slope * step);
        if (denom > 0.0) next = std::clamp(-slope * step * step / denom, 0.1 * step, 0.5 * step);
      } else {
        next = 0.1 * step;
      }
      step = next;
    }

    if (!accepted) {
      if (!mem.empty()) {
        mem.reset();
        continue;
      }
      res.status = LbfgsbStatus::line_search_failure;
      return res;
    }

    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - res.gradient;
    const double f_old = res.f;
    res.x = x_new;
    res.f = f_new;
    res.gradient = g_new;
    ++res.iterations;
    res.trace.push_back(res.f);
    mem.update(s, y);

    res.projected_gradient_norm = projected_gradient_norm(res.x, res.gradient, lower, upper);
    if (res.projected_gradient_norm < options.pgtol) {
      res.status = LbfgsbStatus::gradient_tolerance;
      return res;
    }
    const double scale = std::max({std::abs(f_old), std::abs(f_new), 1.0});
    if ((f_old - f_new) / scale < options.rel_ftol) {
      res.status = LbfgsbStatus::objective_tolerance;
      return res;
    }
  }
  res.status = LbfgsbStatus::max_iterations;
  return res;
}

}  // namespace geocomp::optim
