#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

#include "acdkit/error.hpp"

namespace acdkit::optim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Objective for minimization: returns f(x) and fills *grad when non-null.
// Infeasible points return +inf (or NaN); the line search backs off from them.
using Objective = std::function<double(const Vector& x, Vector* grad)>;

enum class Status { converged, max_iter, line_search_failure };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::converged: return "converged";
    case Status::max_iter: return "max_iter";
    case Status::line_search_failure: return "line_search_failure";
  }
  return "?";
}

struct BfgsOptions {
  int max_iter = 500;
  double f_tol = 1e-8;   // relative change in f
  double x_tol = 1e-6;   // change in x, relative to max(1, |x|)
  double g_tol = 1e-7;   // max-norm of the gradient
  int max_backtracks = 60;
};

struct BfgsResult {
  Vector x;
  double f = 0.0;
  Vector grad;
  int iterations = 0;
  Status status = Status::max_iter;
};

// Quasi-Newton minimization (BFGS inverse-Hessian update, Armijo
// backtracking). Non-finite trial values count as failed steps.
inline BfgsResult minimize_bfgs(const Objective& fn, Vector x0, const BfgsOptions& opt = {}) {
  const auto n = x0.size();
  BfgsResult r;
  r.x = std::move(x0);
  r.grad = Vector::Zero(n);
  r.f = fn(r.x, &r.grad);
  if (!std::isfinite(r.f) || !r.grad.allFinite()) throw ConvergenceError("objective is not finite at the start point");

  Matrix H = Matrix::Identity(n, n);
  bool fresh = true;
  int stalled = 0;
  for (r.iterations = 0; r.iterations < opt.max_iter; ++r.iterations) {
    if (r.grad.lpNorm<Eigen::Infinity>() < opt.g_tol) {
      r.status = Status::converged;
      return r;
    }
    Vector p = -H * r.grad;
    double slope = r.grad.dot(p);
    if (!(slope < 0.0)) {
      H.setIdentity();
      fresh = true;
      p = -r.grad;
      slope = -r.grad.squaredNorm();
    }
    // Keep the first trial step from jumping far outside the current scale.
    const double pmax = p.lpNorm<Eigen::Infinity>();
    const double xscale = std::max(1.0, r.x.lpNorm<Eigen::Infinity>());
    double step = fresh ? std::min(1.0, 0.1 * xscale / pmax) : 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    Vector x_new;
    bool accepted = false;
    for (int b = 0; b < opt.max_backtracks; ++b, step *= 0.5) {
      x_new = r.x + step * p;
      f_new = fn(x_new, nullptr);
      if (std::isfinite(f_new) && f_new <= r.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!fresh) {
        H.setIdentity();
        fresh = true;
        continue;
      }
      r.status = Status::line_search_failure;
      return r;
    }
    Vector g_new(n);
    f_new = fn(x_new, &g_new);
    if (!std::isfinite(f_new) || !g_new.allFinite()) {
      r.status = Status::line_search_failure;
      return r;
    }
    const Vector s = x_new - r.x;
    const Vector y = g_new - r.grad;
    const double f_change = std::abs(r.f - f_new);
    r.x = x_new;
    r.f = f_new;
    r.grad = g_new;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) H *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Matrix I = Matrix::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
      fresh = false;
    }

    const bool small_f = f_change <= opt.f_tol * std::max(1.0, std::abs(r.f));
    const bool small_x = s.lpNorm<Eigen::Infinity>() <= opt.x_tol * std::max(1.0, r.x.lpNorm<Eigen::Infinity>());
    stalled = (small_f && small_x) ? stalled + 1 : 0;
    if (stalled >= 2) {
      r.status = Status::converged;
      ++r.iterations;
      return r;
    }
  }
  r.status = Status::max_iter;
  return r;
}

// Central-difference step used throughout: 1e-5 * max(1, |x|).
inline double fd_step(double x) { return 1e-5 * std::max(1.0, std::abs(x)); }

// Central-difference gradient of a scalar function.
template <typename F>
Vector numerical_gradient(F&& f, const Vector& x) {
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = fd_step(x(k));
    xp(k) = x(k) + h;
    const double fp = f(xp);
    xp(k) = x(k) - h;
    const double fm = f(xp);
    xp(k) = x(k);
    g(k) = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Symmetrized Jacobian of a gradient function by central differences.
template <typename G>
Matrix numerical_hessian_from_gradient(G&& grad, const Vector& x) {
  const auto n = x.size();
  Matrix H(n, n);
  Vector xp = x;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double h = fd_step(x(k));
    xp(k) = x(k) + h;
    const Vector gp = grad(xp);
    xp(k) = x(k) - h;
    const Vector gm = grad(xp);
    xp(k) = x(k);
    H.col(k) = (gp - gm) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

// Second differences of a scalar function (no gradient available). Uses a
// larger step than fd_step since the error scales with eps / h^2.
template <typename F>
Matrix numerical_hessian(F&& f, const Vector& x) {
  const auto n = x.size();
  Matrix H(n, n);
  Vector h(n);
  for (Eigen::Index k = 0; k < n; ++k) h(k) = 1e-4 * std::max(1.0, std::abs(x(k)));
  const double f0 = f(x);
  Vector y = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = x(i) + h(i);
    const double fp = f(y);
    y(i) = x(i) - h(i);
    const double fm = f(y);
    y(i) = x(i);
    H(i, i) = (fp - 2.0 * f0 + fm) / (h(i) * h(i));
    for (Eigen::Index j = 0; j < i; ++j) {
      auto at = [&](double si, double sj) {
        y(i) = x(i) + si * h(i);
        y(j) = x(j) + sj * h(j);
        const double v = f(y);
        y(i) = x(i);
        y(j) = x(j);
        return v;
      };
      H(i, j) = H(j, i) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h(i) * h(j));
    }
  }
  return H;
}

}  // namespace acdkit::optim
