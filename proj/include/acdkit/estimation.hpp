#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "acdkit/acd.hpp"
#include "acdkit/dual.hpp"
#include "acdkit/error.hpp"
#include "acdkit/optim.hpp"
#include "acdkit/parallel.hpp"
#include "acdkit/random.hpp"

namespace acdkit::est {

using optim::Matrix;
using optim::Vector;

struct Normalized {
  DurationSeries series;
  double scale = 1.0;
};

// Divides the durations by their sample mean.
inline Normalized normalize(const DurationSeries& series) {
  const auto v = series.values();
  if (v.empty()) throw ParameterError("cannot normalize an empty series");
  for (double x : v)
    if (!(x > 0.0)) throw ParameterError("normalization needs strictly positive durations");
  const double scale = stats::mean(v);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / scale;
  return {series.with_values(out, series.state()), scale};
}

inline double bic(double loglik, std::size_t n_params, std::size_t n_obs) {
  if (n_obs < 1) throw ParameterError("BIC needs at least one observation");
  return -2.0 * loglik + static_cast<double>(n_params) * std::log(static_cast<double>(n_obs));
}

// Free parameters in optimizer coordinates:
//   [omega, alpha_1..alpha_m, beta_1..beta_q, ln shape_1, ...]
// Shapes live on a log scale; mean-equation coefficients are unconstrained.
inline Vector to_theta(const acd::AcdSpec& spec) {
  Vector th(static_cast<Eigen::Index>(spec.n_params()));
  Eigen::Index k = 0;
  th(k++) = spec.omega;
  for (double a : spec.alpha) th(k++) = a;
  for (double b : spec.beta) th(k++) = b;
  for (double s : spec.innovation.shapes()) th(k++) = std::log(s);
  return th;
}

inline acd::AcdSpec from_theta(const acd::AcdSpec& tmpl, const Vector& th) {
  acd::AcdSpec s = tmpl;
  Eigen::Index k = 0;
  s.omega = th(k++);
  for (auto& a : s.alpha) a = th(k++);
  for (auto& b : s.beta) b = th(k++);
  std::vector<double> shapes;
  for (std::size_t j = 0; j < tmpl.innovation.n_shapes(); ++j) shapes.push_back(std::exp(th(k++)));
  s.innovation = InnovationFamily::make(tmpl.innovation.kind(), shapes);
  return s;
}

// Natural-scale values in the same order as the optimizer coordinates.
inline std::vector<double> natural_parameters(const acd::AcdSpec& spec) {
  std::vector<double> v{spec.omega};
  v.insert(v.end(), spec.alpha.begin(), spec.alpha.end());
  v.insert(v.end(), spec.beta.begin(), spec.beta.end());
  v.insert(v.end(), spec.innovation.shapes().begin(), spec.innovation.shapes().end());
  return v;
}

inline std::vector<std::string> parameter_names(const acd::AcdSpec& spec) {
  std::vector<std::string> n{"omega"};
  for (std::size_t j = 1; j <= spec.m(); ++j) n.push_back("alpha" + std::to_string(j));
  for (std::size_t j = 1; j <= spec.q(); ++j) n.push_back("beta" + std::to_string(j));
  switch (spec.innovation.kind()) {
    case InnovationKind::exponential: break;
    case InnovationKind::weibull: n.push_back("k"); break;
    case InnovationKind::gamma: n.push_back("d"); break;
    case InnovationKind::generalized_gamma:
      n.push_back("d");
      n.push_back("m");
      break;
  }
  return n;
}

// Log-likelihood, its gradient in optimizer coordinates and, optionally, the
// per-observation scores (one row per active observation).
struct ScoreEvaluation {
  double loglik = 0.0;
  Vector gradient;
  Matrix scores;
};

namespace detail {

template <std::size_t N>
ScoreEvaluation evaluate_dual(const acd::AcdSpec& tmpl, const Vector& th, const DurationSeries& series,
                              const acd::InitPlan& plan, bool want_scores) {
  using D = Dual<N>;
  const auto P = static_cast<std::size_t>(th.size());
  acd::MeanParams<D> p;
  std::size_t k = 0;
  p.omega = D::variable(th(0), k++);
  for (std::size_t j = 0; j < tmpl.m(); ++j, ++k) p.alpha.push_back(D::variable(th(static_cast<Eigen::Index>(k)), k));
  for (std::size_t j = 0; j < tmpl.q(); ++j, ++k) p.beta.push_back(D::variable(th(static_cast<Eigen::Index>(k)), k));
  std::vector<D> shapes;
  for (; k < P; ++k) shapes.push_back(exp(D::variable(th(static_cast<Eigen::Index>(k)), k)));
  const LogDensity<D> dens(tmpl.innovation.kind(), shapes);
  std::vector<D> contrib;
  const D total = acd::loglik_sum<D>(tmpl.form, p, dens, series, plan, want_scores ? &contrib : nullptr);
  ScoreEvaluation out;
  out.loglik = total.v;
  out.gradient.resize(static_cast<Eigen::Index>(P));
  for (std::size_t j = 0; j < P; ++j) out.gradient(static_cast<Eigen::Index>(j)) = total.d[j];
  if (want_scores) {
    out.scores.resize(static_cast<Eigen::Index>(contrib.size()), static_cast<Eigen::Index>(P));
    for (std::size_t i = 0; i < contrib.size(); ++i)
      for (std::size_t j = 0; j < P; ++j)
        out.scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = contrib[i].d[j];
  }
  return out;
}

}  // namespace detail

inline ScoreEvaluation evaluate_scores(const acd::AcdSpec& tmpl, const Vector& th, const DurationSeries& series,
                                       const acd::InitPlan& plan, bool want_scores = false) {
  const auto P = th.size();
  if (P <= 4) return detail::evaluate_dual<4>(tmpl, th, series, plan, want_scores);
  if (P <= 8) return detail::evaluate_dual<8>(tmpl, th, series, plan, want_scores);
  if (P <= 16) return detail::evaluate_dual<16>(tmpl, th, series, plan, want_scores);
  if (P <= 32) return detail::evaluate_dual<32>(tmpl, th, series, plan, want_scores);
  throw UnsupportedError("too many free parameters");
}

inline double evaluate_loglik(const acd::AcdSpec& tmpl, const Vector& th, const DurationSeries& series,
                              const acd::InitPlan& plan) {
  const auto spec = from_theta(tmpl, th);
  const LogDensity<double> dens(spec.innovation.kind(), spec.innovation.shapes());
  return acd::loglik_sum<double>(spec.form, acd::mean_params(spec), dens, series, plan);
}

inline std::size_t count_active(const DurationSeries& series, const acd::InitPlan& plan) {
  std::size_t n = 0;
  const auto& segs = series.segments();
  for (std::size_t k = 0; k < segs.size(); ++k)
    if (plan.first_active[k] < segs[k].entries.size()) n += segs[k].entries.size() - plan.first_active[k];
  return n;
}

struct RobustCovariance {
  std::vector<double> std_errors;          // sandwich, natural scale
  std::vector<double> hessian_std_errors;  // inverse observed information, natural scale
  Matrix covariance;                       // sandwich, optimizer coordinates
};

// White sandwich H^-1 (sum s_i s_i') H^-1 with H the numerical Hessian of the
// total log-likelihood (central differences of the exact gradient). Shape
// errors are mapped back from the log scale by the delta method.
inline RobustCovariance robust_std_errors(const acd::AcdSpec& spec, const DurationSeries& series) {
  const auto plan = acd::make_init_plan(spec.init, series, spec.session);
  const Vector th = to_theta(spec);
  const auto at_opt = evaluate_scores(spec, th, series, plan, true);
  const Matrix H = optim::numerical_hessian_from_gradient(
      [&](const Vector& x) { return evaluate_scores(spec, x, series, plan, false).gradient; }, th);
  const Matrix opg = at_opt.scores.transpose() * at_opt.scores;
  Eigen::LDLT<Matrix> ldlt(-H);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array() <= 0.0).any())
    throw SingularError("Hessian is singular or not negative definite at the optimum; consider lower ACD orders");
  const Matrix info_inv = ldlt.solve(Matrix::Identity(th.size(), th.size()));
  RobustCovariance rc;
  rc.covariance = info_inv * opg * info_inv;
  const auto natural = natural_parameters(spec);
  const std::size_t first_shape = 1 + spec.m() + spec.q();
  for (Eigen::Index j = 0; j < th.size(); ++j) {
    const auto u = static_cast<std::size_t>(j);
    const double jac = u >= first_shape ? natural[u] : 1.0;
    rc.std_errors.push_back(jac * std::sqrt(rc.covariance(j, j)));
    rc.hessian_std_errors.push_back(jac * std::sqrt(info_inv(j, j)));
  }
  return rc;
}

struct FitOptions {
  int n_starts = 5;
  double jitter = 0.2;  // +/- multiplicative noise on start values
  std::uint64_t seed = 1;
  unsigned threads = 1;
  optim::BfgsOptions bfgs;
  bool compute_std_errors = true;
  double normalization_constant = 1.0;  // recorded in the result only
};

struct FitResult {
  acd::AcdSpec spec;
  double loglik = 0.0;
  double bic = 0.0;
  std::vector<double> std_errors;
  std::vector<double> hessian_std_errors;
  optim::Status convergence = optim::Status::max_iter;
  std::size_t n_obs = 0;
  int iterations = 0;
  double normalization_constant = 1.0;
  double gradient_max_norm = 0.0;  // of the per-observation mean log-likelihood
  std::size_t best_start = 0;
  std::vector<double> start_logliks;  // NaN for starts that failed

  std::vector<double> parameters() const { return natural_parameters(spec); }
  std::vector<std::string> names() const { return parameter_names(spec); }
};

// Maximizes the log-likelihood from the template's start values and from
// n_starts - 1 jittered copies; the best optimum wins (ties by start index).
inline FitResult fit_mle(const DurationSeries& series, const acd::AcdSpec& tmpl, const FitOptions& options = {}) {
  tmpl.validate();
  const auto plan = acd::make_init_plan(tmpl.init, series, tmpl.session);
  const std::size_t n = count_active(series, plan);
  const std::size_t P = tmpl.n_params();
  if (n < 10 * P)
    throw ParameterError("series has " + std::to_string(n) + " usable observations; at least " +
                         std::to_string(10 * P) + " required");
  const double inv_n = 1.0 / static_cast<double>(n);

  optim::Objective objective = [&](const Vector& x, Vector* grad) -> double {
    try {
      if (grad) {
        const auto ev = evaluate_scores(tmpl, x, series, plan, false);
        *grad = -ev.gradient * inv_n;
        return -ev.loglik * inv_n;
      }
      return -evaluate_loglik(tmpl, x, series, plan) * inv_n;
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  const Vector base = to_theta(tmpl);
  const int n_starts = std::max(1, options.n_starts);
  std::vector<Vector> starts;
  starts.push_back(base);
  auto rng = make_rng(options.seed, 0x5eed);
  std::uniform_real_distribution<double> jit(1.0 - options.jitter, 1.0 + options.jitter);
  for (int s = 1; s < n_starts; ++s) {
    Vector cand = base;
    for (int attempt = 0; attempt < 50; ++attempt) {
      cand = base;
      for (Eigen::Index j = 0; j < cand.size(); ++j) {
        if (static_cast<std::size_t>(j) >= 1 + tmpl.m() + tmpl.q())
          cand(j) = base(j) + std::log(jit(rng));  // multiplicative on the shape itself
        else
          cand(j) = base(j) * jit(rng);
      }
      if (std::isfinite(objective(cand, nullptr))) break;
    }
    starts.push_back(cand);
  }

  struct Run {
    bool ok = false;
    optim::BfgsResult res;
    double start_ll = std::numeric_limits<double>::quiet_NaN();
    std::string error;
  };
  auto runs = parallel_map(
      starts.size(),
      [&](std::size_t i) {
        Run r;
        const double f0 = objective(starts[i], nullptr);
        if (!std::isfinite(f0)) {
          r.error = "start " + std::to_string(i) + " infeasible";
          return r;
        }
        r.start_ll = -f0 * static_cast<double>(n);
        try {
          r.res = optim::minimize_bfgs(objective, starts[i], options.bfgs);
          r.ok = std::isfinite(r.res.f);
        } catch (const Error& e) {
          r.error = e.what();
        }
        return r;
      },
      options.threads);

  std::size_t best = runs.size();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!runs[i].ok) continue;
    if (best == runs.size() || runs[i].res.f < runs[best].res.f) best = i;
  }
  if (best == runs.size()) {
    std::string msg = "all " + std::to_string(runs.size()) + " starts failed:";
    for (const auto& r : runs) msg += " [" + r.error + "]";
    throw ConvergenceError(msg);
  }

  const auto& win = runs[best].res;
  FitResult fit;
  fit.spec = from_theta(tmpl, win.x);
  fit.loglik = -win.f * static_cast<double>(n);
  fit.n_obs = n;
  fit.bic = bic(fit.loglik, P, n);
  fit.convergence = win.status;
  fit.iterations = win.iterations;
  fit.normalization_constant = options.normalization_constant;
  fit.gradient_max_norm = win.grad.lpNorm<Eigen::Infinity>();
  fit.best_start = best;
  for (const auto& r : runs) fit.start_logliks.push_back(r.start_ll);
  if (options.compute_std_errors) {
    const auto rc = robust_std_errors(fit.spec, series);
    fit.std_errors = rc.std_errors;
    fit.hessian_std_errors = rc.hessian_std_errors;
  }
  return fit;
}

// Normalizes by the sample mean, fits, and records the constant.
inline FitResult fit_normalized(const DurationSeries& series, const acd::AcdSpec& tmpl, FitOptions options = {}) {
  const auto norm = normalize(series);
  options.normalization_constant = norm.scale;
  return fit_mle(norm.series, tmpl, options);
}

}  // namespace acdkit::est
