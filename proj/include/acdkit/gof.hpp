#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "acdkit/durations.hpp"
#include "acdkit/error.hpp"
#include "acdkit/optim.hpp"
#include "acdkit/parallel.hpp"
#include "acdkit/random.hpp"
#include "acdkit/stats.hpp"

namespace acdkit::gof {

enum class NullFamily { exponential, weibull, gamma, generalized_pareto, normal };

inline const char* to_string(NullFamily f) {
  switch (f) {
    case NullFamily::exponential: return "exponential";
    case NullFamily::weibull: return "weibull";
    case NullFamily::gamma: return "gamma";
    case NullFamily::generalized_pareto: return "generalized_pareto";
    case NullFamily::normal: return "normal";
  }
  return "?";
}

// Parameter layout per family:
//   exponential          {mean}
//   weibull              {scale a, shape b}
//   gamma                {scale a, shape b}
//   generalized_pareto   {scale sigma, shape k, location theta}
//                        F = 1 - (1 - k (x - theta) / sigma)^(1/k); k = 0 is exponential
//   normal               {mean, sd}
struct NullDistribution {
  NullFamily family = NullFamily::exponential;
  std::vector<double> params;
  std::vector<double> std_errors;  // location of the GPD is fixed, so its error is 0
  double loglik = 0.0;

  std::vector<std::string> names() const {
    switch (family) {
      case NullFamily::exponential: return {"mean"};
      case NullFamily::weibull:
      case NullFamily::gamma: return {"scale", "shape"};
      case NullFamily::generalized_pareto: return {"scale", "shape", "location"};
      case NullFamily::normal: return {"mean", "sd"};
    }
    return {};
  }

  double cdf(double x) const {
    switch (family) {
      case NullFamily::exponential: return x <= 0.0 ? 0.0 : -std::expm1(-x / params[0]);
      case NullFamily::weibull: return x <= 0.0 ? 0.0 : -std::expm1(-std::pow(x / params[0], params[1]));
      case NullFamily::gamma: return x <= 0.0 ? 0.0 : boost::math::gamma_p(params[1], x / params[0]);
      case NullFamily::generalized_pareto: {
        const double sigma = params[0], k = params[1], y = x - params[2];
        if (y <= 0.0) return 0.0;
        if (std::abs(k) < 1e-12) return -std::expm1(-y / sigma);
        const double t = 1.0 - k * y / sigma;
        if (t <= 0.0) return 1.0;
        return -std::expm1(std::log(t) / k);
      }
      case NullFamily::normal: return stats::normal_cdf((x - params[0]) / params[1]);
    }
    return 0.0;
  }

  double sample(Rng& rng) const {
    switch (family) {
      case NullFamily::exponential: return std::exponential_distribution<double>(1.0 / params[0])(rng);
      case NullFamily::weibull: return std::weibull_distribution<double>(params[1], params[0])(rng);
      case NullFamily::gamma: return std::gamma_distribution<double>(params[1], params[0])(rng);
      case NullFamily::generalized_pareto: {
        const double sigma = params[0], k = params[1];
        const double u = open_uniform(rng);
        if (std::abs(k) < 1e-12) return params[2] - sigma * std::log(u);
        return params[2] + sigma * (1.0 - std::pow(u, k)) / k;
      }
      case NullFamily::normal: return std::normal_distribution<double>(params[0], params[1])(rng);
    }
    return 0.0;
  }
};

// Log-likelihood of a sample under a family with natural parameters; -inf
// outside the parameter space.
inline double null_loglik(NullFamily family, std::span<const double> params, std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  switch (family) {
    case NullFamily::exponential: {
      const double mu = params[0];
      if (!(mu > 0.0)) return ninf;
      double s = 0.0;
      for (double v : x) s += v;
      return -n * std::log(mu) - s / mu;
    }
    case NullFamily::weibull: {
      const double a = params[0], b = params[1];
      if (!(a > 0.0 && b > 0.0)) return ninf;
      double sl = 0.0, sp = 0.0;
      for (double v : x) {
        sl += std::log(v);
        sp += std::pow(v / a, b);
      }
      return n * (std::log(b) - b * std::log(a)) + (b - 1.0) * sl - sp;
    }
    case NullFamily::gamma: {
      const double a = params[0], b = params[1];
      if (!(a > 0.0 && b > 0.0)) return ninf;
      double sl = 0.0, s = 0.0;
      for (double v : x) {
        sl += std::log(v);
        s += v;
      }
      return (b - 1.0) * sl - s / a - n * (b * std::log(a) + std::lgamma(b));
    }
    case NullFamily::generalized_pareto: {
      const double sigma = params[0], k = params[1], theta = params[2];
      if (!(sigma > 0.0)) return ninf;
      double acc = 0.0;
      if (std::abs(k) < 1e-12) {
        for (double v : x) acc += v - theta;
        return -n * std::log(sigma) - acc / sigma;
      }
      for (double v : x) {
        const double t = 1.0 - k * (v - theta) / sigma;
        if (!(t > 0.0)) return ninf;
        acc += std::log(t);
      }
      return -n * std::log(sigma) + (1.0 / k - 1.0) * acc;
    }
    case NullFamily::normal: {
      const double mu = params[0], sd = params[1];
      if (!(sd > 0.0)) return ninf;
      double ss = 0.0;
      for (double v : x) ss += (v - mu) * (v - mu);
      return -0.5 * n * std::log(2.0 * std::numbers::pi * sd * sd) - 0.5 * ss / (sd * sd);
    }
  }
  return ninf;
}

struct FitNullOptions {
  std::optional<double> fixed_shape;  // weibull / gamma only
  double gpd_location = 0.0;
  bool compute_std_errors = true;
};

namespace detail {

inline void require_positive_sample(std::span<const double> x) {
  if (x.size() < 2) throw ParameterError("null fitting needs at least two observations");
  for (double v : x)
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("sample must be strictly positive");
}

inline bool all_identical(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

// Root of a decreasing function on (0, inf), bracketed by doubling/halving.
template <typename F>
double decreasing_root(F&& f, double guess) {
  double lo = guess, hi = guess;
  int guard = 0;
  while (f(lo) < 0.0) {
    lo *= 0.5;
    if (++guard > 200) throw ConvergenceError("failed to bracket shape estimate");
  }
  guard = 0;
  while (f(hi) > 0.0) {
    hi *= 2.0;
    if (++guard > 200) throw ConvergenceError("failed to bracket shape estimate");
  }
  if (lo == hi) return lo;
  std::uintmax_t iters = 200;
  auto tol = boost::math::tools::eps_tolerance<double>(50);
  auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
  return 0.5 * (a + b);
}

inline std::vector<double> hessian_std_errors(NullFamily family, const std::vector<double>& params,
                                              std::span<const double> x, std::size_t n_free) {
  optim::Vector p(static_cast<Eigen::Index>(n_free));
  for (std::size_t j = 0; j < n_free; ++j) p(static_cast<Eigen::Index>(j)) = params[j];
  auto ll = [&](const optim::Vector& v) {
    std::vector<double> full = params;
    for (std::size_t j = 0; j < n_free; ++j) full[j] = v(static_cast<Eigen::Index>(j));
    return null_loglik(family, full, x);
  };
  const optim::Matrix H = optim::numerical_hessian(ll, p);
  std::vector<double> se(params.size(), 0.0);
  Eigen::LDLT<optim::Matrix> ldlt(-H);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    std::fill(se.begin(), se.end(), std::numeric_limits<double>::quiet_NaN());
    return se;
  }
  const optim::Matrix cov = ldlt.solve(optim::Matrix::Identity(p.size(), p.size()));
  for (std::size_t j = 0; j < n_free; ++j) {
    const double v = cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
    se[j] = v > 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
  }
  return se;
}

}  // namespace detail

// Maximum likelihood fit of a null family. Exponential and normal use closed
// forms (the normal sd uses the n - 1 divisor); Weibull and Gamma solve the
// profile score equation for the shape; the GPD is maximized numerically
// with its location held fixed.
inline NullDistribution fit_null(std::span<const double> x, NullFamily family, const FitNullOptions& opt = {}) {
  NullDistribution d;
  d.family = family;
  const double n = static_cast<double>(x.size());
  switch (family) {
    case NullFamily::exponential: {
      detail::require_positive_sample(x);
      const double mu = stats::mean(x);
      d.params = {mu};
      d.std_errors = {mu / std::sqrt(n)};
      break;
    }
    case NullFamily::normal: {
      if (x.size() < 2) throw ParameterError("normal fit needs at least two observations");
      const double sd = std::sqrt(stats::variance(x));
      if (!(sd > 0.0)) throw DomainError("normal fit of a constant sample");
      d.params = {stats::mean(x), sd};
      d.std_errors = {sd / std::sqrt(n), sd / std::sqrt(2.0 * n)};
      break;
    }
    case NullFamily::weibull: {
      detail::require_positive_sample(x);
      std::vector<double> lx(x.size());
      double mean_log = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) mean_log += (lx[i] = std::log(x[i]));
      mean_log /= n;
      // Work with u = x / geometric mean so x^b stays representable.
      auto moments = [&](double b) {
        double s0 = 0.0, s1 = 0.0;
        for (double l : lx) {
          const double u = std::exp(b * (l - mean_log));
          s0 += u;
          s1 += u * (l - mean_log);
        }
        return std::pair{s0, s1};
      };
      double b = 0.0;
      if (opt.fixed_shape) {
        b = *opt.fixed_shape;
      } else {
        if (detail::all_identical(x)) throw DomainError("Weibull fit of a constant sample is degenerate");
        b = detail::decreasing_root(
            [&](double bb) {
              auto [s0, s1] = moments(bb);
              return 1.0 / bb - s1 / s0;
            },
            1.0);
      }
      const double a = std::exp(mean_log) * std::pow(moments(b).first / n, 1.0 / b);
      d.params = {a, b};
      if (opt.compute_std_errors) d.std_errors = detail::hessian_std_errors(family, d.params, x, opt.fixed_shape ? 1 : 2);
      break;
    }
    case NullFamily::gamma: {
      detail::require_positive_sample(x);
      const double mean = stats::mean(x);
      double b = 0.0;
      if (opt.fixed_shape) {
        b = *opt.fixed_shape;
      } else {
        if (detail::all_identical(x)) throw DomainError("Gamma fit of a constant sample is degenerate");
        double mean_log = 0.0;
        for (double v : x) mean_log += std::log(v);
        mean_log /= n;
        const double s = std::log(mean) - mean_log;
        if (!(s > 0.0)) throw DomainError("Gamma fit of a (numerically) constant sample");
        b = detail::decreasing_root([&](double bb) { return std::log(bb) - boost::math::digamma(bb) - s; },
                                    0.5 / s);
      }
      d.params = {mean / b, b};
      if (opt.compute_std_errors) d.std_errors = detail::hessian_std_errors(family, d.params, x, opt.fixed_shape ? 1 : 2);
      break;
    }
    case NullFamily::generalized_pareto: {
      const double theta = opt.gpd_location;
      std::vector<double> y(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = x[i] - theta;
        if (!(y[i] > 0.0)) throw DomainError("GPD sample must exceed the location");
      }
      if (detail::all_identical(y)) throw DomainError("GPD fit of a constant sample is degenerate");
      const double m = stats::mean(y), v = stats::variance(y);
      double k0 = 0.5 * (m * m / v - 1.0);
      k0 = std::clamp(k0, -0.9, 0.9);
      const double ymax = *std::max_element(y.begin(), y.end());
      double s0 = m * (1.0 + k0);
      if (k0 > 0.0) s0 = std::max(s0, 1.01 * k0 * ymax);
      // Coordinates (ln sigma, k); k < 1 keeps the likelihood bounded.
      auto negll = [&](const optim::Vector& p) {
        if (!(p(1) < 1.0)) return std::numeric_limits<double>::infinity();
        const std::array<double, 3> par{std::exp(p(0)), p(1), 0.0};
        const double l = null_loglik(NullFamily::generalized_pareto, par, y);
        return std::isfinite(l) ? -l / static_cast<double>(y.size()) : std::numeric_limits<double>::infinity();
      };
      optim::Objective obj = [&](const optim::Vector& p, optim::Vector* g) {
        const double f = negll(p);
        if (g && std::isfinite(f)) *g = optim::numerical_gradient(negll, p);
        return f;
      };
      optim::Vector p0(2);
      p0 << std::log(s0), k0;
      if (!std::isfinite(negll(p0))) {
        p0 << std::log(m), 0.0;
      }
      const auto res = optim::minimize_bfgs(obj, p0, {.max_iter = 300, .f_tol = 1e-12, .x_tol = 1e-9, .g_tol = 1e-8});
      d.params = {std::exp(res.x(0)), res.x(1), theta};
      if (opt.compute_std_errors) {
        d.std_errors = detail::hessian_std_errors(family, d.params, x, 2);
        d.std_errors[2] = 0.0;
      }
      break;
    }
  }
  d.loglik = null_loglik(family, d.params, x);
  if (!std::isfinite(d.loglik)) throw ConvergenceError("null fit ended outside the parameter space");
  return d;
}

enum class Statistic { D, V, W2, U2, A2 };
inline constexpr std::array<Statistic, 5> kAllStatistics{Statistic::D, Statistic::V, Statistic::W2, Statistic::U2,
                                                         Statistic::A2};

inline const char* to_string(Statistic s) {
  switch (s) {
    case Statistic::D: return "D";
    case Statistic::V: return "V";
    case Statistic::W2: return "W2";
    case Statistic::U2: return "U2";
    case Statistic::A2: return "A2";
  }
  return "?";
}

inline constexpr double kZClamp = 1e-15;

struct EdfStatistics {
  std::size_t n = 0;
  double d_plus = 0.0, d_minus = 0.0, d = 0.0, v = 0.0;  // unscaled
  double w2 = 0.0, u2 = 0.0, a2 = 0.0;
  bool sqrt_n_scaled = true;  // whether value() multiplies D and V by sqrt(n)

  double value(Statistic s) const {
    const double r = sqrt_n_scaled ? std::sqrt(static_cast<double>(n)) : 1.0;
    switch (s) {
      case Statistic::D: return d * r;
      case Statistic::V: return v * r;
      case Statistic::W2: return w2;
      case Statistic::U2: return u2;
      case Statistic::A2: return a2;
    }
    return 0.0;
  }
};

// EDF statistics from z_i = F(x_(i)) in ascending order.
inline EdfStatistics edf_from_sorted_z(std::span<const double> z, bool sqrt_n_scaled = true) {
  const std::size_t n = z.size();
  if (n == 0) throw ParameterError("EDF statistics need a non-empty sample");
  const double nd = static_cast<double>(n);
  EdfStatistics s;
  s.n = n;
  s.sqrt_n_scaled = sqrt_n_scaled;
  s.d_plus = -std::numeric_limits<double>::infinity();
  s.d_minus = -std::numeric_limits<double>::infinity();
  double w = 0.0, zsum = 0.0, a = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double i = static_cast<double>(k + 1);
    s.d_plus = std::max(s.d_plus, i / nd - z[k]);
    s.d_minus = std::max(s.d_minus, z[k] - (i - 1.0) / nd);
    const double c = z[k] - (2.0 * i - 1.0) / (2.0 * nd);
    w += c * c;
    zsum += z[k];
    const double lo = std::clamp(z[k], kZClamp, 1.0 - kZClamp);
    const double hi = std::clamp(z[n - 1 - k], kZClamp, 1.0 - kZClamp);
    a += (2.0 * i - 1.0) * (std::log(lo) + std::log1p(-hi));
  }
  s.d = std::max(s.d_plus, s.d_minus);
  s.v = s.d_plus + s.d_minus;
  s.w2 = w + 1.0 / (12.0 * nd);
  const double zbar = zsum / nd - 0.5;
  s.u2 = s.w2 - nd * zbar * zbar;
  s.a2 = -a / nd - nd;
  return s;
}

inline EdfStatistics edf_statistics(std::span<const double> sample, const NullDistribution& null,
                                    bool sqrt_n_scaled = true) {
  if (sample.empty()) throw ParameterError("EDF statistics need a non-empty sample");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  for (auto& v : x) v = null.cdf(v);
  return edf_from_sorted_z(x, sqrt_n_scaled);
}

// estimated: every replicate is refitted and tested against its own fit.
// fixed: replicates are tested against the generating parameters.
enum class McProtocol { estimated, fixed };

inline const char* to_string(McProtocol p) { return p == McProtocol::estimated ? "estimated" : "fixed"; }

struct CriticalValueTable {
  NullFamily family = NullFamily::exponential;
  std::vector<double> generating_params;
  McProtocol protocol = McProtocol::estimated;
  std::size_t n = 0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  bool sqrt_n_scaled = true;
  std::vector<double> levels;
  std::array<std::vector<double>, 5> values;  // [statistic][level]

  double critical(Statistic s, double level) const {
    for (std::size_t j = 0; j < levels.size(); ++j)
      if (std::abs(levels[j] - level) < 1e-12) return values[static_cast<std::size_t>(s)][j];
    throw ParameterError("significance level not present in the critical-value table");
  }
};

struct McOptions {
  McProtocol protocol = McProtocol::estimated;
  bool sqrt_n_scaled = true;
  unsigned threads = 1;
  double gpd_location = 0.0;
};

// Parametric bootstrap of the EDF statistics under `generating`. Critical
// value at level a is the round(M (1 - a))-th order statistic of the
// replicates. A replicate whose refit fails is redrawn; more than 10 M
// draws in total is an error.
inline CriticalValueTable mc_critical_values(const NullDistribution& generating, std::size_t n, std::size_t M,
                                             std::vector<double> levels = {0.05, 0.025, 0.01},
                                             std::uint64_t seed = 1, const McOptions& opt = {}) {
  if (n < 2) throw ParameterError("replicate size must be at least 2");
  if (M < 1) throw ParameterError("need at least one replicate");
  for (double a : levels)
    if (!(a > 0.0 && a < 1.0)) throw ParameterError("significance levels must lie in (0, 1)");
  constexpr std::size_t kTriesPerReplicate = 10;

  struct Rep {
    std::array<double, 5> stat{};
    std::size_t draws = 0;
    bool ok = false;
  };
  auto reps = parallel_map(
      M,
      [&](std::size_t r) {
        Rep out;
        std::vector<double> x(n);
        for (std::size_t attempt = 0; attempt < kTriesPerReplicate; ++attempt) {
          ++out.draws;
          auto rng = make_rng(mix_seed(seed, r), attempt);
          for (auto& v : x) v = generating.sample(rng);
          try {
            NullDistribution ref = generating;
            if (opt.protocol == McProtocol::estimated)
              ref = fit_null(x, generating.family, {.fixed_shape = std::nullopt, .gpd_location = opt.gpd_location, .compute_std_errors = false});
            const auto s = edf_statistics(x, ref, opt.sqrt_n_scaled);
            for (auto st : kAllStatistics) out.stat[static_cast<std::size_t>(st)] = s.value(st);
            out.ok = true;
            break;
          } catch (const Error&) {
          }
        }
        return out;
      },
      opt.threads);

  std::size_t draws = 0;
  for (const auto& r : reps) {
    draws += r.draws;
    if (!r.ok) throw ConvergenceError("bootstrap replicate could not be refitted");
  }
  if (draws > 10 * M) throw ConvergenceError("too many failed bootstrap replicates");

  CriticalValueTable t;
  t.family = generating.family;
  t.generating_params = generating.params;
  t.protocol = opt.protocol;
  t.n = n;
  t.replicates = M;
  t.seed = seed;
  t.sqrt_n_scaled = opt.sqrt_n_scaled;
  t.levels = levels;
  for (auto st : kAllStatistics) {
    const auto si = static_cast<std::size_t>(st);
    std::vector<double> col(M);
    for (std::size_t r = 0; r < M; ++r) col[r] = reps[r].stat[si];
    std::sort(col.begin(), col.end());
    for (double a : levels) {
      auto idx = static_cast<std::size_t>(std::llround(static_cast<double>(M) * (1.0 - a)));
      idx = std::clamp<std::size_t>(idx, 1, M);
      t.values[si].push_back(col[idx - 1]);
    }
  }
  return t;
}

struct GofReport {
  NullDistribution fitted;
  EdfStatistics statistics;
  double level = 0.05;
  std::array<double, 5> critical{};
  std::array<bool, 5> reject{};

  bool rejects(Statistic s) const { return reject[static_cast<std::size_t>(s)]; }
};

// Fits the null and compares each statistic with its upper-tail critical value.
inline GofReport gof_test(std::span<const double> sample, NullFamily family, const CriticalValueTable& table,
                          double level = 0.05, double gpd_location = 0.0) {
  if (table.family != family) throw ParameterError("critical-value table was built for a different family");
  GofReport rep;
  rep.level = level;
  rep.fitted = fit_null(sample, family, {.fixed_shape = std::nullopt, .gpd_location = gpd_location});
  rep.statistics = edf_statistics(sample, rep.fitted, table.sqrt_n_scaled);
  for (auto st : kAllStatistics) {
    const auto si = static_cast<std::size_t>(st);
    rep.critical[si] = table.critical(st, level);
    rep.reject[si] = rep.statistics.value(st) > rep.critical[si];
  }
  return rep;
}

struct WithinDayOptions {
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
  std::size_t min_obs = 20;
  unsigned threads = 1;
  double gpd_location = 0.0;
};

struct DayOutcome {
  int day_index = 0;
  std::size_t n = 0;
  bool tested = false;
  bool pass = false;
};

struct WithinDayResult {
  std::size_t n0 = 0;     // days on which D, W2 and A2 all accept
  std::size_t n_days = 0;  // days tested
  double share = 0.0;
  std::vector<DayOutcome> days;  // includes skipped days (tested = false)
};

// Tests every day separately with its own bootstrap table.
inline WithinDayResult within_day_share(const DurationSeries& series, NullFamily family, double level = 0.05,
                                        const WithinDayOptions& opt = {}) {
  WithinDayResult out;
  const auto& segs = series.segments();
  for (std::size_t k = 0; k < segs.size(); ++k) {
    DayOutcome day{segs[k].day_index, segs[k].entries.size(), false, false};
    std::vector<double> x;
    for (const auto& e : segs[k].entries) x.push_back(e.duration);
    if (x.size() >= opt.min_obs) {
      const auto fitted = fit_null(x, family, {.fixed_shape = std::nullopt, .gpd_location = opt.gpd_location, .compute_std_errors = false});
      const auto table = mc_critical_values(fitted, x.size(), opt.replicates, {level}, mix_seed(opt.seed, k),
                                            {.threads = opt.threads, .gpd_location = opt.gpd_location});
      const auto rep = gof_test(x, family, table, level, opt.gpd_location);
      day.tested = true;
      day.pass = !rep.rejects(Statistic::D) && !rep.rejects(Statistic::W2) && !rep.rejects(Statistic::A2);
      ++out.n_days;
      if (day.pass) ++out.n0;
    }
    out.days.push_back(day);
  }
  out.share = out.n_days == 0 ? 0.0 : static_cast<double>(out.n0) / static_cast<double>(out.n_days);
  return out;
}

}  // namespace acdkit::gof
