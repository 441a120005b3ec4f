#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "acdkit/error.hpp"

namespace acdkit::stats {

inline double mean(std::span<const double> x) {
  if (x.empty()) throw ParameterError("mean of empty sample");
  // Pairwise-free Kahan-style compensation keeps 1e6-sized sums exact enough
  // for the 1e-12 normalization contract.
  double s = 0.0, c = 0.0;
  for (double v : x) {
    const double y = v - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s / static_cast<double>(x.size());
}

// Unbiased (n - 1) sample variance.
inline double variance(std::span<const double> x) {
  if (x.size() < 2) throw ParameterError("variance needs at least two observations");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

// Sample autocorrelations rho_1..rho_max_lag (index k-1 holds lag k).
inline std::vector<double> autocorrelations(std::span<const double> x, std::size_t max_lag) {
  const std::size_t n = x.size();
  if (n <= max_lag) throw ParameterError("series length must exceed the number of lags");
  const double m = mean(x);
  double denom = 0.0;
  for (double v : x) denom += (v - m) * (v - m);
  if (!(denom > 0.0)) throw UndefinedError("autocorrelation undefined for a constant series");
  std::vector<double> rho(max_lag);
  for (std::size_t k = 1; k <= max_lag; ++k) {
    double num = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) num += (x[t] - m) * (x[t + k] - m);
    rho[k - 1] = num / denom;
  }
  return rho;
}

inline double chi_squared_sf(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), x));
}

inline double chi_squared_quantile(double p, double dof) {
  return boost::math::quantile(boost::math::chi_squared(dof), p);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

struct LjungBox {
  double q = 0.0;
  double p_value = 1.0;
  std::size_t lags = 0;
};

inline LjungBox ljung_box(std::span<const double> x, std::size_t lags) {
  if (lags == 0) throw ParameterError("Ljung-Box needs at least one lag");
  const auto rho = autocorrelations(x, lags);
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (std::size_t k = 1; k <= lags; ++k) s += rho[k - 1] * rho[k - 1] / (n - static_cast<double>(k));
  LjungBox r;
  r.q = n * (n + 2.0) * s;
  r.p_value = chi_squared_sf(r.q, static_cast<double>(lags));
  r.lags = lags;
  return r;
}

// Smallest x with empirical F(x) >= p, on an already sorted sample.
inline double ecdf_quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ParameterError("quantile of empty sample");
  if (p <= 0.0) return sorted.front();
  const double pos = std::ceil(p * static_cast<double>(sorted.size()) - 1e-9);
  const auto k = static_cast<std::size_t>(std::clamp(pos, 1.0, static_cast<double>(sorted.size())));
  return sorted[k - 1];
}

inline double ecdf_quantile(std::span<const double> x, double p) {
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  return ecdf_quantile_sorted(s, p);
}

}  // namespace acdkit::stats
