#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "acdkit/dual.hpp"
#include "acdkit/durations.hpp"
#include "acdkit/error.hpp"
#include "acdkit/innovation.hpp"
#include "acdkit/random.hpp"
#include "acdkit/seasonality.hpp"
#include "acdkit/stats.hpp"
#include "acdkit/ticks.hpp"

namespace acdkit::acd {

// Conditional-mean equation.
//   linear     psi_i = w + sum a_j w_{i-j} + sum b_j psi_{i-j}
//   log_type1  ln psi_i = w + sum a_j ln w_{i-j} + sum b_j ln psi_{i-j}
//   log_type2  ln psi_i = w + sum a_j (w_{i-j}/psi_{i-j}) + sum b_j ln psi_{i-j}
// In every form the observation equation is w_i = psi_i * eps_i.
enum class MeanForm { linear, log_type1, log_type2 };

inline const char* to_string(MeanForm f) {
  switch (f) {
    case MeanForm::linear: return "linear";
    case MeanForm::log_type1: return "log_type1";
    case MeanForm::log_type2: return "log_type2";
  }
  return "?";
}

// How psi is started at the beginning of every trading day.
struct InitRule {
  enum class Kind { unconditional_mean, sample_mean, first_window_mean };
  Kind kind = Kind::first_window_mean;
  double window_minutes = 15.0;

  static InitRule unconditional_mean() { return {Kind::unconditional_mean, 0.0}; }
  static InitRule sample_mean() { return {Kind::sample_mean, 0.0}; }
  static InitRule first_window_mean(double minutes = 15.0) { return {Kind::first_window_mean, minutes}; }
};

struct AcdSpec {
  MeanForm form = MeanForm::linear;
  double omega = 0.1;
  std::vector<double> alpha{0.1};
  std::vector<double> beta{0.8};
  InnovationFamily innovation = InnovationFamily::exponential();
  InitRule init;
  Session session;

  std::size_t m() const noexcept { return alpha.size(); }
  std::size_t q() const noexcept { return beta.size(); }
  std::size_t n_params() const noexcept { return 1 + m() + q() + innovation.n_shapes(); }

  double alpha_sum() const { return std::accumulate(alpha.begin(), alpha.end(), 0.0); }
  double beta_sum() const { return std::accumulate(beta.begin(), beta.end(), 0.0); }

  bool weakly_stationary() const {
    switch (form) {
      case MeanForm::linear: return alpha_sum() + beta_sum() < 1.0;
      case MeanForm::log_type1: return std::abs(alpha_sum() + beta_sum()) < 1.0;
      case MeanForm::log_type2: return std::abs(beta_sum()) < 1.0;
    }
    return false;
  }

  // Linear-form parameters are estimated unconstrained; this only flags
  // sign patterns that do not guarantee positive psi.
  bool has_negative_coefficients() const {
    if (form != MeanForm::linear) return false;
    auto neg = [](double v) { return v < 0.0; };
    return omega <= 0.0 || std::any_of(alpha.begin(), alpha.end(), neg) || std::any_of(beta.begin(), beta.end(), neg);
  }

  void validate() const {
    if (alpha.empty() || beta.empty()) throw ParameterError("ACD orders must both be at least 1");
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::isfinite(omega) || !std::all_of(alpha.begin(), alpha.end(), finite) ||
        !std::all_of(beta.begin(), beta.end(), finite))
      throw ParameterError("ACD parameters must be finite");
    if (init.kind == InitRule::Kind::first_window_mean && !(init.window_minutes > 0.0))
      throw ParameterError("initialization window must be positive");
  }

  std::string label() const {
    std::string fam;
    switch (innovation.kind()) {
      case InnovationKind::exponential: fam = "EACD"; break;
      case InnovationKind::weibull: fam = "WACD"; break;
      case InnovationKind::gamma: fam = "GACD"; break;
      case InnovationKind::generalized_gamma: fam = "GGACD"; break;
    }
    if (form != MeanForm::linear) fam = (form == MeanForm::log_type1 ? "Log1-" : "Log2-") + fam;
    return fam + "(" + std::to_string(m()) + "," + std::to_string(q()) + ")";
  }
};

// Mean-equation coefficients as (possibly dual) scalars.
template <typename S>
struct MeanParams {
  S omega{0.0};
  std::vector<S> alpha;
  std::vector<S> beta;
};

inline MeanParams<double> mean_params(const AcdSpec& spec) { return {spec.omega, spec.alpha, spec.beta}; }

// Level of psi at which the deterministic recursion (eps = 1) is at rest.
// For the linear form this is the unconditional mean.
template <typename S>
S steady_state_level(MeanForm form, const MeanParams<S>& p) {
  using std::exp;
  S a(0.0), b(0.0);
  for (const auto& v : p.alpha) a += v;
  for (const auto& v : p.beta) b += v;
  switch (form) {
    case MeanForm::linear: {
      const S denom = 1.0 - a - b;
      if (!(denom > 0.0)) throw NonStationaryError("sum of alpha and beta must be below one");
      const S level = p.omega / denom;
      if (!(level > 0.0)) throw NonStationaryError("unconditional mean is not positive");
      return level;
    }
    case MeanForm::log_type1: {
      const S denom = 1.0 - a - b;
      if (!(std::abs(value_of(a + b)) < 1.0)) throw NonStationaryError("|sum alpha + sum beta| must be below one");
      return exp(p.omega / denom);
    }
    case MeanForm::log_type2: {
      const S denom = 1.0 - b;
      if (!(std::abs(value_of(b)) < 1.0)) throw NonStationaryError("|sum beta| must be below one");
      return exp((p.omega + a) / denom);
    }
  }
  return S(1.0);
}

// Data-dependent part of the per-day initialization: which observations
// start the likelihood and, unless the rule is unconditional_mean, the
// starting level of psi.
struct InitPlan {
  std::vector<std::size_t> first_active;
  std::vector<double> level;  // unused for unconditional_mean
  bool model_level = false;
};

inline InitPlan make_init_plan(const InitRule& rule, const DurationSeries& series, const Session& session) {
  InitPlan plan;
  const auto& segs = series.segments();
  plan.first_active.assign(segs.size(), 0);
  plan.level.assign(segs.size(), 0.0);
  if (rule.kind == InitRule::Kind::unconditional_mean) {
    plan.model_level = true;
    return plan;
  }
  const auto all = series.values();
  if (all.empty()) throw ParameterError("empty duration series");
  const double overall = stats::mean(all);
  if (rule.kind == InitRule::Kind::sample_mean) {
    std::fill(plan.level.begin(), plan.level.end(), overall);
    return plan;
  }
  const double window_end = session.open + rule.window_minutes * 60.0;
  for (std::size_t k = 0; k < segs.size(); ++k) {
    const auto& e = segs[k].entries;
    std::size_t i = 0;
    double sum = 0.0;
    while (i < e.size() && e[i].start_time < window_end) sum += e[i++].duration;
    plan.first_active[k] = i;
    // A day with nothing in the window falls back to the pooled mean.
    plan.level[k] = (i > 0 && sum > 0.0) ? sum / static_cast<double>(i) : overall;
  }
  return plan;
}

// Runs the psi recursion over every day and calls
// visit(global_index, w, psi, log_psi) for each active observation.
template <typename S, typename Visit>
void run_recursion(MeanForm form, const MeanParams<S>& p, const DurationSeries& series, const InitPlan& plan,
                   Visit&& visit) {
  using std::exp;
  using std::log;
  const std::size_t m = p.alpha.size(), q = p.beta.size();
  std::optional<S> model_level;
  if (plan.model_level) model_level = steady_state_level(form, p);

  std::vector<S> psi, lpsi, ratio;
  std::size_t global = 0;
  const auto& segs = series.segments();
  for (std::size_t k = 0; k < segs.size(); ++k) {
    const auto& e = segs[k].entries;
    const std::size_t i0 = plan.first_active[k];
    if (i0 >= e.size()) {
      global += e.size();
      continue;
    }
    const S init = model_level ? *model_level : S(plan.level[k]);
    const S log_init = log(init);
    const std::size_t n = e.size() - i0;
    psi.assign(n, S(0.0));
    lpsi.assign(n, S(0.0));
    if (form == MeanForm::log_type2) ratio.assign(n, S(0.0));
    global += i0;
    for (std::size_t t = 0; t < n; ++t, ++global) {
      const double w = e[i0 + t].duration;
      if (t == 0) {
        psi[0] = init;
        lpsi[0] = log_init;
      } else if (form == MeanForm::linear) {
        S v = p.omega;
        for (std::size_t j = 1; j <= m; ++j) v += p.alpha[j - 1] * (t >= j ? S(e[i0 + t - j].duration) : init);
        for (std::size_t j = 1; j <= q; ++j) v += p.beta[j - 1] * (t >= j ? psi[t - j] : init);
        if (!(v > 0.0)) throw PositivityError(global, value_of(v));
        psi[t] = v;
        lpsi[t] = log(v);
      } else {
        S v = p.omega;
        for (std::size_t j = 1; j <= m; ++j) {
          if (form == MeanForm::log_type1) {
            if (t >= j) {
              const double wl = e[i0 + t - j].duration;
              if (!(wl > 0.0)) throw DomainError("log-ACD type 1 needs positive durations (index " +
                                                 std::to_string(global - j) + ")");
              v += p.alpha[j - 1] * std::log(wl);
            } else {
              v += p.alpha[j - 1] * log_init;
            }
          } else {
            v += p.alpha[j - 1] * (t >= j ? ratio[t - j] : S(1.0));
          }
        }
        for (std::size_t j = 1; j <= q; ++j) v += p.beta[j - 1] * (t >= j ? lpsi[t - j] : log_init);
        lpsi[t] = v;
        psi[t] = exp(v);
      }
      if (form == MeanForm::log_type2) ratio[t] = w / psi[t];
      visit(global, w, psi[t], lpsi[t]);
    }
  }
}

// Conditional means for every observation; days restart at their init value.
struct PsiPath {
  std::vector<std::vector<double>> psi;  // per day, active observations only
  std::vector<std::size_t> first_active;
  std::size_t n_active() const {
    std::size_t n = 0;
    for (const auto& d : psi) n += d.size();
    return n;
  }
  std::vector<double> flat() const {
    std::vector<double> out;
    for (const auto& d : psi) out.insert(out.end(), d.begin(), d.end());
    return out;
  }
};

inline PsiPath filter_psi(const AcdSpec& spec, const DurationSeries& series) {
  spec.validate();
  const auto plan = make_init_plan(spec.init, series, spec.session);
  PsiPath path;
  path.first_active = plan.first_active;
  path.psi.resize(series.segments().size());
  // Map global indices back to days.
  std::vector<std::size_t> day_end;
  std::size_t acc = 0;
  for (const auto& s : series.segments()) day_end.push_back(acc += s.entries.size());
  std::size_t day = 0;
  run_recursion<double>(spec.form, mean_params(spec), series, plan,
                        [&](std::size_t g, double, double psi, double) {
                          while (g >= day_end[day]) ++day;
                          path.psi[day].push_back(psi);
                        });
  return path;
}

struct Loglik {
  double total = 0.0;
  std::vector<double> contributions;
};

// Generic composition: l_i = ln p(w_i / psi_i) - ln psi_i.
template <typename S>
S loglik_sum(MeanForm form, const MeanParams<S>& p, const LogDensity<S>& density, const DurationSeries& series,
             const InitPlan& plan, std::vector<S>* contributions = nullptr) {
  using std::isfinite;
  S total(0.0);
  if (contributions) contributions->clear();
  run_recursion<S>(form, p, series, plan, [&](std::size_t g, double w, const S& psi, const S& lpsi) {
    if (!(w > 0.0)) throw DomainError("likelihood needs positive durations (index " + std::to_string(g) + ")");
    const S x = w / psi;
    const S lx = std::log(w) - lpsi;
    const S l = density(x, lx) - lpsi;
    if (!isfinite(l)) throw Error("non-finite likelihood contribution at observation " + std::to_string(g));
    total += l;
    if (contributions) contributions->push_back(l);
  });
  return total;
}

inline Loglik loglik(const AcdSpec& spec, const DurationSeries& series) {
  spec.validate();
  const auto plan = make_init_plan(spec.init, series, spec.session);
  const LogDensity<double> dens(spec.innovation.kind(), spec.innovation.shapes());
  Loglik out;
  out.total = loglik_sum<double>(spec.form, mean_params(spec), dens, series, plan, &out.contributions);
  return out;
}

// Closed-form log-likelihoods written directly in w and psi for each family:
//   EACD   -(w/psi + ln psi)
//   WACD   ln(k/w) + k ln(G w/psi) - (G w/psi)^k,  G = Gamma(1 + 1/k)
//   GG-ACD ln(m/w) + d ln y - y^m - ln Gamma(d/m),  y = w Gamma((d+1)/m) / (psi Gamma(d/m))
// Gamma innovations use the GG-ACD expression with m = 1.
inline double loglik_closed_form(const AcdSpec& spec, const DurationSeries& series) {
  spec.validate();
  const auto plan = make_init_plan(spec.init, series, spec.session);
  const auto& fam = spec.innovation;
  double total = 0.0;
  const double d = fam.gg_d(), m = fam.gg_m();
  const double G = std::tgamma(1.0 + 1.0 / m);
  const double ratio = std::exp(std::lgamma((d + 1.0) / m) - std::lgamma(d / m));
  const double lg = std::lgamma(d / m);
  run_recursion<double>(spec.form, mean_params(spec), series, plan, [&](std::size_t, double w, double psi, double) {
    switch (fam.kind()) {
      case InnovationKind::exponential: total += -(w / psi + std::log(psi)); break;
      case InnovationKind::weibull: {
        const double k = m, y = G * w / psi;
        total += std::log(k / w) + k * std::log(y) - std::pow(y, k);
        break;
      }
      case InnovationKind::gamma:
      case InnovationKind::generalized_gamma: {
        const double y = w * ratio / psi;
        total += std::log(m / w) + d * std::log(y) - std::pow(y, m) - lg;
        break;
      }
    }
  });
  return total;
}

// Hazard rate `elapsed` seconds after the last event, given the conditional
// mean psi of the pending duration: h(elapsed / psi) / psi.
inline double conditional_intensity(const AcdSpec& spec, double elapsed, double psi_next) {
  if (elapsed < 0.0) throw DomainError("elapsed time must be non-negative");
  if (!(psi_next > 0.0)) throw DomainError("conditional mean must be positive");
  return spec.innovation.hazard(elapsed / psi_next) / psi_next;
}

// Closed-form Weibull intensity [Gamma(1+1/k)/psi]^k elapsed^(k-1) k.
inline double weibull_intensity(double k, double elapsed, double psi_next) {
  return std::pow(std::tgamma(1.0 + 1.0 / k) / psi_next, k) * std::pow(elapsed, k - 1.0) * k;
}

inline double unconditional_mean(const AcdSpec& spec) {
  if (spec.form != MeanForm::linear) throw UnsupportedError("unconditional mean is only available for the linear form");
  const double s = spec.alpha_sum() + spec.beta_sum();
  if (!(s < 1.0)) throw NonStationaryError("sum of alpha and beta must be below one");
  return spec.omega / (1.0 - s);
}

namespace detail {
inline void require_acd11(const AcdSpec& spec) {
  if (spec.form != MeanForm::linear || spec.m() != 1 || spec.q() != 1)
    throw UnsupportedError("closed form available for linear ACD(1,1) only");
  if (!spec.weakly_stationary()) throw NonStationaryError("ACD(1,1) is not weakly stationary");
}
}  // namespace detail

// Unconditional variance of ACD(1,1) for innovations with E(eps^2) given.
inline double unconditional_variance(const AcdSpec& spec, double second_moment_eps) {
  detail::require_acd11(spec);
  const double a = spec.alpha[0], b = spec.beta[0];
  const double mu = unconditional_mean(spec);
  const double base = 1.0 - b * b - 2.0 * a * b;
  const double denom = base - a * a * second_moment_eps;
  if (!(denom > 0.0)) throw NonStationaryError("second moment of durations is infinite");
  const double num = second_moment_eps * (base - a * a) - denom;
  return mu * mu * num / denom;
}

inline double unconditional_variance(const AcdSpec& spec) {
  return unconditional_variance(spec, spec.innovation.second_moment());
}

// First-order autocorrelation of ACD(1,1).
inline double acf1(const AcdSpec& spec) {
  detail::require_acd11(spec);
  const double a = spec.alpha[0], b = spec.beta[0];
  return a * (1.0 - b * b - a * b) / (1.0 - b * b - 2.0 * a * b);
}

struct ArmaForm {
  std::vector<double> ar;  // alpha_j + beta_j, j = 1..max(m,q)
  std::vector<double> ma;  // -beta_j, j = 1..q
  bool stationary = false;  // roots of 1 - alpha(L) - beta(L) outside the unit circle
  bool invertible = false;  // roots of 1 - beta(L) outside the unit circle
};

namespace detail {
// All roots of 1 - sum c_j z^j outside the unit circle <=> companion
// eigenvalues strictly inside it.
inline bool roots_outside_unit_circle(const std::vector<double>& c) {
  const auto p = static_cast<Eigen::Index>(c.size());
  if (p == 0) return true;
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) comp(0, j) = c[static_cast<std::size_t>(j)];
  for (Eigen::Index j = 1; j < p; ++j) comp(j, j - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  for (Eigen::Index j = 0; j < p; ++j)
    if (std::abs(es.eigenvalues()(j)) >= 1.0) return false;
  return true;
}
}  // namespace detail

inline ArmaForm arma_coefficients(const AcdSpec& spec) {
  if (spec.form != MeanForm::linear) throw UnsupportedError("ARMA representation exists for the linear form only");
  const std::size_t p = std::max(spec.m(), spec.q());
  ArmaForm out;
  out.ar.assign(p, 0.0);
  for (std::size_t j = 0; j < spec.m(); ++j) out.ar[j] += spec.alpha[j];
  for (std::size_t j = 0; j < spec.q(); ++j) out.ar[j] += spec.beta[j];
  for (double b : spec.beta) out.ma.push_back(-b);
  out.stationary = detail::roots_outside_unit_circle(out.ar);
  out.invertible = detail::roots_outside_unit_circle(spec.beta);
  return out;
}

struct SimulationOptions {
  bool make_ticks = true;
  double start_price = 100.0;
  double price_volatility = 1e-4;  // sd of per-tick log-price increments
  double volume = 100.0;
};

struct Simulation {
  // psi_i * eps_i, timed on the calendar clock. Deseasonalized when a profile
  // was applied, raw seconds otherwise.
  DurationSeries durations;
  // The eps_i draws, flattened in series order.
  std::vector<double> innovations;
  // Ticks inside the session (empty if not requested).
  std::vector<TickDay> ticks;
};

// Each day starts at the session open with psi and all pre-sample lags at
// the steady-state level, so an unconditional_mean filter replays the draws
// exactly. Calendar durations are s(t) * psi * eps when a profile is given.
inline Simulation simulate(const AcdSpec& spec, std::size_t n_per_day, std::size_t n_days, std::uint64_t seed,
                           const std::optional<seasonal::DiurnalProfile>& profile = std::nullopt,
                           const SimulationOptions& options = {}) {
  spec.validate();
  if (seed == 0) throw ParameterError("simulation seed must be positive");
  if (!spec.weakly_stationary()) throw NonStationaryError("refusing to simulate a non-stationary specification");
  const auto p = mean_params(spec);
  const double level = steady_state_level(spec.form, p);
  const double log_level = std::log(level);
  const std::size_t m = spec.m(), q = spec.q();
  const auto close_ms = std::llround(spec.session.close * 1000.0);

  Simulation sim;
  sim.innovations.reserve(n_per_day * n_days);
  std::vector<DaySegment> segs;
  for (std::size_t day = 0; day < n_days; ++day) {
    auto rng = make_rng(seed, 2 * day);
    auto price_rng = make_rng(seed, 2 * day + 1);
    std::normal_distribution<double> z(0.0, 1.0);
    DaySegment seg{static_cast<int>(day), {}};
    seg.entries.reserve(n_per_day);
    std::vector<double> w(n_per_day), psi(n_per_day), lpsi(n_per_day);
    double t = spec.session.open;
    std::vector<TickRecord> ticks;
    double log_price = std::log(options.start_price);
    if (options.make_ticks) ticks.push_back({static_cast<int>(day), std::llround(t * 1000.0), options.start_price,
                                             options.volume});
    for (std::size_t i = 0; i < n_per_day; ++i) {
      if (i == 0) {
        psi[i] = level;
        lpsi[i] = log_level;
      } else if (spec.form == MeanForm::linear) {
        double v = spec.omega;
        for (std::size_t j = 1; j <= m; ++j) v += spec.alpha[j - 1] * (i >= j ? w[i - j] : level);
        for (std::size_t j = 1; j <= q; ++j) v += spec.beta[j - 1] * (i >= j ? psi[i - j] : level);
        if (!(v > 0.0)) throw PositivityError(i, v);
        psi[i] = v;
        lpsi[i] = std::log(v);
      } else {
        double v = spec.omega;
        for (std::size_t j = 1; j <= m; ++j) {
          if (spec.form == MeanForm::log_type1)
            v += spec.alpha[j - 1] * (i >= j ? std::log(w[i - j]) : log_level);
          else
            v += spec.alpha[j - 1] * (i >= j ? w[i - j] / psi[i - j] : 1.0);
        }
        for (std::size_t j = 1; j <= q; ++j) v += spec.beta[j - 1] * (i >= j ? lpsi[i - j] : log_level);
        lpsi[i] = v;
        psi[i] = std::exp(v);
      }
      const double eps = spec.innovation.sample(rng);
      sim.innovations.push_back(eps);
      w[i] = psi[i] * eps;
      const double calendar = profile ? (*profile)(t) * w[i] : w[i];
      seg.entries.push_back({t, t + calendar, w[i]});
      t += calendar;
      if (options.make_ticks) {
        const auto ms = std::llround(t * 1000.0);
        if (ms <= close_ms) {
          log_price += options.price_volatility * z(price_rng);
          ticks.push_back({static_cast<int>(day), ms, std::exp(log_price), options.volume});
        }
      }
    }
    segs.push_back(std::move(seg));
    if (options.make_ticks) sim.ticks.emplace_back(static_cast<int>(day), std::move(ticks));
  }
  sim.durations = DurationSeries(DurationKind::trade, profile ? SeasonalState::deseasonalized : SeasonalState::raw,
                                 std::move(segs));
  return sim;
}

}  // namespace acdkit::acd
