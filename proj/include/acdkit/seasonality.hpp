#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "acdkit/durations.hpp"
#include "acdkit/error.hpp"
#include "acdkit/ticks.hpp"

namespace acdkit::seasonal {

inline constexpr double kProfileFloor = 1e-6;

// Natural cubic spline through (x_i, y_i); linear beyond the end nodes.
class NaturalCubicSpline {
 public:
  NaturalCubicSpline() = default;
  NaturalCubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) throw ParameterError("spline needs at least two nodes");
    for (std::size_t i = 1; i < n; ++i)
      if (!(x_[i] > x_[i - 1])) throw ParameterError("spline nodes must be strictly increasing");
    m_.assign(n, 0.0);
    if (n == 2) return;
    // Tridiagonal system for interior second derivatives (Thomas algorithm).
    const std::size_t k = n - 2;
    std::vector<double> a(k), b(k), c(k), r(k);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
      a[i - 1] = h0;
      b[i - 1] = 2.0 * (h0 + h1);
      c[i - 1] = h1;
      r[i - 1] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    for (std::size_t i = 1; i < k; ++i) {
      const double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      r[i] -= w * r[i - 1];
    }
    std::vector<double> sol(k);
    sol[k - 1] = r[k - 1] / b[k - 1];
    for (std::size_t i = k - 1; i-- > 0;) sol[i] = (r[i] - c[i] * sol[i + 1]) / b[i];
    for (std::size_t i = 0; i < k; ++i) m_[i + 1] = sol[i];
  }

  double operator()(double t) const {
    const std::size_t n = x_.size();
    if (t <= x_.front()) return y_.front() + slope(0, true) * (t - x_.front());
    if (t >= x_.back()) return y_.back() + slope(n - 2, false) * (t - x_.back());
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double A = (x_[i + 1] - t) / h, B = (t - x_[i]) / h;
    return A * y_[i] + B * y_[i + 1] + ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
  }

  const std::vector<double>& nodes() const noexcept { return x_; }
  const std::vector<double>& values() const noexcept { return y_; }

 private:
  // End slope of interval i at its left (or right) node.
  double slope(std::size_t i, bool left) const {
    const double h = x_[i + 1] - x_[i];
    const double d = (y_[i + 1] - y_[i]) / h;
    return left ? d - h * (2.0 * m_[i] + m_[i + 1]) / 6.0 : d + h * (m_[i] + 2.0 * m_[i + 1]) / 6.0;
  }

  std::vector<double> x_, y_, m_;
};

struct FourierCoefficients {
  double intercept = 0.0;
  double trend = 0.0;
  std::vector<double> cosine;
  std::vector<double> sine;

  std::size_t order() const noexcept { return cosine.size(); }
};

enum class ProfileForm { cubic_spline, fourier };

// Deterministic time-of-day factor s(t), t in seconds since midnight.
class DiurnalProfile {
 public:
  static DiurnalProfile spline(std::vector<double> node_times, std::vector<double> node_values, Session session = {}) {
    for (double v : node_values)
      if (!(v > 0.0)) throw ParameterError("spline node values must be positive");
    for (double t : node_times)
      if (!session.contains(t)) throw ParameterError("spline node outside the session");
    DiurnalProfile p;
    p.form_ = ProfileForm::cubic_spline;
    p.session_ = session;
    p.spline_ = NaturalCubicSpline(std::move(node_times), std::move(node_values));
    return p;
  }

  static DiurnalProfile fourier(FourierCoefficients coef, Session session = {}) {
    if (coef.cosine.size() != coef.sine.size()) throw ParameterError("cosine and sine orders differ");
    DiurnalProfile p;
    p.form_ = ProfileForm::fourier;
    p.session_ = session;
    p.fourier_ = std::move(coef);
    return p;
  }

  ProfileForm form() const noexcept { return form_; }
  const Session& session() const noexcept { return session_; }
  const NaturalCubicSpline& spline_curve() const { return spline_; }
  const FourierCoefficients& fourier_coefficients() const { return fourier_; }

  // Fraction of the session elapsed at t, clamped to [0, 1].
  double normalized_time(double t) const {
    return std::clamp((t - session_.open) / session_.length(), 0.0, 1.0);
  }

  double operator()(double t) const {
    double s = 0.0;
    if (form_ == ProfileForm::cubic_spline) {
      s = spline_(t);
    } else {
      const double tb = normalized_time(t);
      s = fourier_.intercept + fourier_.trend * tb;
      for (std::size_t j = 0; j < fourier_.order(); ++j) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(j + 1) * tb;
        s += fourier_.cosine[j] * std::cos(a) + fourier_.sine[j] * std::sin(a);
      }
    }
    return std::max(s, kProfileFloor);
  }

 private:
  ProfileForm form_ = ProfileForm::cubic_spline;
  Session session_;
  NaturalCubicSpline spline_;
  FourierCoefficients fourier_;
};

// Bin means of durations by start time, pooled over days, interpolated by a
// natural cubic spline through the bin centres.
inline DiurnalProfile estimate_spline_profile(const DurationSeries& series, int bin_minutes = 15,
                                              const Session& session = {}) {
  if (bin_minutes <= 0) throw ParameterError("bin width must be positive");
  if (series.state() != SeasonalState::raw) throw ParameterError("profile estimation needs raw durations");
  const double width = bin_minutes * 60.0;
  const double nb = session.length() / width;
  const auto nbins = static_cast<std::size_t>(std::llround(nb));
  if (std::abs(nb - static_cast<double>(nbins)) > 1e-9 || nbins < 2)
    throw ParameterError("bin width must divide the session into at least two bins");
  std::vector<double> sum(nbins, 0.0);
  std::vector<std::size_t> count(nbins, 0);
  for (const auto& seg : series.segments()) {
    for (const auto& e : seg.entries) {
      if (e.start_time < session.open || e.start_time > session.close) continue;
      auto b = static_cast<std::size_t>((e.start_time - session.open) / width);
      b = std::min(b, nbins - 1);
      sum[b] += e.duration;
      ++count[b];
    }
  }
  std::vector<double> t(nbins), v(nbins);
  for (std::size_t b = 0; b < nbins; ++b) {
    if (count[b] == 0 || !(sum[b] > 0.0))
      throw ParameterError("diurnal bin " + std::to_string(b) + " starting at " +
                           format_number(session.open + static_cast<double>(b) * width) +
                           "s has no positive durations; use wider bins");
    t[b] = session.open + (static_cast<double>(b) + 0.5) * width;
    v[b] = sum[b] / static_cast<double>(count[b]);
  }
  return DiurnalProfile::spline(std::move(t), std::move(v), session);
}

struct FourierRegression {
  FourierCoefficients coefficients;
  // OLS standard errors, ordered intercept, trend, cos_1, sin_1, ..., cos_q, sin_q.
  std::vector<double> std_errors;
  double residual_variance = 0.0;
};

inline FourierRegression fourier_regression(const DurationSeries& series, int q, const Session& session = {}) {
  if (q < 0) throw ParameterError("Fourier order must be non-negative");
  const auto n = static_cast<Eigen::Index>(series.size());
  const Eigen::Index p = 2 + 2 * q;
  if (n <= p) throw SingularError("too few observations for the Fourier design");
  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd y(n);
  Eigen::Index r = 0;
  for (const auto& seg : series.segments()) {
    for (const auto& e : seg.entries) {
      const double tb = std::clamp((e.start_time - session.open) / session.length(), 0.0, 1.0);
      X(r, 0) = 1.0;
      X(r, 1) = tb;
      for (int j = 1; j <= q; ++j) {
        const double a = 2.0 * std::numbers::pi * j * tb;
        X(r, 2 * j) = std::cos(a);
        X(r, 2 * j + 1) = std::sin(a);
      }
      y(r) = e.duration;
      ++r;
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) throw SingularError("Fourier design matrix is rank deficient");
  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd resid = y - X * beta;
  FourierRegression out;
  out.residual_variance = resid.squaredNorm() / static_cast<double>(n - p);
  const Eigen::MatrixXd xtx_inv = (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  out.std_errors.resize(static_cast<std::size_t>(p));
  for (Eigen::Index k = 0; k < p; ++k)
    out.std_errors[static_cast<std::size_t>(k)] = std::sqrt(out.residual_variance * xtx_inv(k, k));
  auto& c = out.coefficients;
  c.intercept = beta(0);
  c.trend = beta(1);
  for (int j = 1; j <= q; ++j) {
    c.cosine.push_back(beta(2 * j));
    c.sine.push_back(beta(2 * j + 1));
  }
  return out;
}

inline DiurnalProfile estimate_fourier_profile(const DurationSeries& series, int q, const Session& session = {}) {
  return DiurnalProfile::fourier(fourier_regression(series, q, session).coefficients, session);
}

// w~_i = w_i / s(start of duration i).
inline DurationSeries deseasonalize(const DurationSeries& series, const DiurnalProfile& profile) {
  if (series.state() != SeasonalState::raw) throw ParameterError("series is already deseasonalized");
  auto segs = series.segments();
  for (auto& s : segs)
    for (auto& e : s.entries) e.duration /= profile(e.start_time);
  return DurationSeries(series.kind(), SeasonalState::deseasonalized, std::move(segs), series.contiguous(),
                        series.aggregation());
}

inline DurationSeries reseasonalize(const DurationSeries& series, const DiurnalProfile& profile) {
  if (series.state() != SeasonalState::deseasonalized) throw ParameterError("series is not deseasonalized");
  auto segs = series.segments();
  for (auto& s : segs)
    for (auto& e : s.entries) e.duration *= profile(e.start_time);
  return DurationSeries(series.kind(), SeasonalState::raw, std::move(segs), series.contiguous(),
                        series.aggregation());
}

}  // namespace acdkit::seasonal
