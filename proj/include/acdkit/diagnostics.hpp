#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "acdkit/acd.hpp"
#include "acdkit/error.hpp"
#include "acdkit/stats.hpp"

namespace acdkit::diag {

// 5% critical value of chi-squared(20), the default Ljung-Box decision rule.
inline constexpr double kLjungBox20Critical5 = 31.41;

// eps_hat_i = w_i / psi_hat_i over the active observations.
struct ResidualSeries {
  std::vector<double> values;
};

inline ResidualSeries residuals(const acd::AcdSpec& spec, const DurationSeries& series) {
  spec.validate();
  const auto plan = acd::make_init_plan(spec.init, series, spec.session);
  ResidualSeries r;
  r.values.reserve(series.size());
  acd::run_recursion<double>(spec.form, acd::mean_params(spec), series, plan,
                             [&](std::size_t, double w, double psi, double) { r.values.push_back(w / psi); });
  return r;
}

using stats::LjungBox;

inline LjungBox ljung_box(std::span<const double> x, std::size_t lags = 20) {
  return stats::ljung_box(x, lags);
}

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// sqrt(n) (s^2 - 1) / (2 sqrt 2): asymptotically N(0,1) for unit-exponential
// residuals. Two-sided p-value.
inline TestResult excess_dispersion_test(std::span<const double> residuals) {
  if (residuals.size() < 2) throw ParameterError("dispersion test needs at least two residuals");
  const double n = static_cast<double>(residuals.size());
  const double s2 = stats::variance(residuals);
  TestResult r;
  r.statistic = std::sqrt(n) * (s2 - 1.0) / (2.0 * std::numbers::sqrt2);
  r.p_value = 2.0 * stats::normal_cdf(-std::abs(r.statistic));
  return r;
}

// One-step-ahead conditional CDF values F_eps(w_i / psi_i).
inline std::vector<double> pit(const DurationSeries& series, const acd::AcdSpec& spec) {
  const auto res = residuals(spec, series);
  std::vector<double> q;
  q.reserve(res.values.size());
  for (double e : res.values) q.push_back(spec.innovation.cdf(e));
  return q;
}

// Equal-width bins on [0, 1], each with expected probability 1/T.
inline TestResult pit_chisq(std::span<const double> q, std::size_t n_categories = 20) {
  if (q.empty()) throw ParameterError("PIT chi-squared needs data");
  if (n_categories < 2) throw ParameterError("need at least two categories");
  std::vector<double> count(n_categories, 0.0);
  for (double v : q) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("PIT values must lie in [0, 1]");
    auto b = static_cast<std::size_t>(v * static_cast<double>(n_categories));
    count[std::min(b, n_categories - 1)] += 1.0;
  }
  const double expected = static_cast<double>(q.size()) / static_cast<double>(n_categories);
  TestResult r;
  for (double c : count) r.statistic += (c - expected) * (c - expected) / expected;
  r.p_value = stats::chi_squared_sf(r.statistic, static_cast<double>(n_categories - 1));
  return r;
}

// (lag, rho_lag) for lag = 1..max_lag, optionally preceded by (0, 1).
inline std::vector<std::pair<std::size_t, double>> correlogram(std::span<const double> x, std::size_t max_lag,
                                                               bool include_lag0 = false) {
  const auto rho = stats::autocorrelations(x, max_lag);
  std::vector<std::pair<std::size_t, double>> out;
  if (include_lag0) out.emplace_back(0, 1.0);
  for (std::size_t k = 1; k <= max_lag; ++k) out.emplace_back(k, rho[k - 1]);
  return out;
}

struct DiagnosticReport {
  LjungBox lb;
  TestResult dispersion;
  TestResult pit_chi2;
  std::vector<double> acf;
  std::size_t n = 0;
};

// Runs the full residual battery for a fitted specification. The dispersion
// test assumes an exponential null regardless of the fitted family.
inline DiagnosticReport diagnose(const acd::AcdSpec& spec, const DurationSeries& series, std::size_t lb_lags = 20,
                                 std::size_t pit_bins = 20, std::size_t acf_lags = 50) {
  const auto res = residuals(spec, series);
  DiagnosticReport rep;
  rep.n = res.values.size();
  rep.lb = ljung_box(res.values, lb_lags);
  rep.dispersion = excess_dispersion_test(res.values);
  std::vector<double> q;
  q.reserve(res.values.size());
  for (double e : res.values) q.push_back(spec.innovation.cdf(e));
  rep.pit_chi2 = pit_chisq(q, pit_bins);
  rep.acf = stats::autocorrelations(res.values, std::min(acf_lags, res.values.size() - 1));
  return rep;
}

}  // namespace acdkit::diag
