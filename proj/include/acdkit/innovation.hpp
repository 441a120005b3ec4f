#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "acdkit/dual.hpp"
#include "acdkit/error.hpp"
#include "acdkit/random.hpp"

namespace acdkit {

enum class InnovationKind { exponential, weibull, gamma, generalized_gamma };

inline const char* to_string(InnovationKind k) {
  switch (k) {
    case InnovationKind::exponential: return "exponential";
    case InnovationKind::weibull: return "weibull";
    case InnovationKind::gamma: return "gamma";
    case InnovationKind::generalized_gamma: return "generalized_gamma";
  }
  return "?";
}

// Unit-mean innovation law of an ACD model. The scale of every family is
// pinned analytically so that E(eps) = 1; only shapes are free.
//
//   exponential           -
//   weibull(k)            scale 1 / Gamma(1 + 1/k)
//   gamma(d)              generalized gamma with m = 1, scale 1/d
//   generalized_gamma(d,m) scale Gamma(d/m) / Gamma((d+1)/m)
class InnovationFamily {
 public:
  static InnovationFamily exponential() { return InnovationFamily(InnovationKind::exponential, {}); }
  static InnovationFamily weibull(double k) { return InnovationFamily(InnovationKind::weibull, {k}); }
  static InnovationFamily gamma(double d) { return InnovationFamily(InnovationKind::gamma, {d}); }
  static InnovationFamily generalized_gamma(double d, double m) {
    return InnovationFamily(InnovationKind::generalized_gamma, {d, m});
  }
  static InnovationFamily make(InnovationKind kind, std::vector<double> shapes) {
    return InnovationFamily(kind, std::move(shapes));
  }

  InnovationKind kind() const noexcept { return kind_; }
  const std::vector<double>& shapes() const noexcept { return shapes_; }
  std::size_t n_shapes() const noexcept { return shape_count(kind_); }

  static std::size_t shape_count(InnovationKind k) noexcept {
    switch (k) {
      case InnovationKind::exponential: return 0;
      case InnovationKind::weibull:
      case InnovationKind::gamma: return 1;
      case InnovationKind::generalized_gamma: return 2;
    }
    return 0;
  }

  // Generalized-gamma (d, m) pair describing this family.
  double gg_d() const noexcept {
    switch (kind_) {
      case InnovationKind::exponential: return 1.0;
      case InnovationKind::weibull:
      case InnovationKind::gamma:
      case InnovationKind::generalized_gamma: return shapes_[0];
    }
    return 1.0;
  }
  double gg_m() const noexcept {
    switch (kind_) {
      case InnovationKind::exponential:
      case InnovationKind::gamma: return 1.0;
      case InnovationKind::weibull: return shapes_[0];
      case InnovationKind::generalized_gamma: return shapes_[1];
    }
    return 1.0;
  }

  // Scale making the mean one (the lambda / a of the textbook densities).
  double scale() const {
    const double d = gg_d(), m = gg_m();
    return std::exp(std::lgamma(d / m) - std::lgamma((d + 1.0) / m));
  }

  double log_density(double x) const {
    check_positive(x);
    return log_density_kernel(x);
  }
  double density(double x) const { return std::exp(log_density(x)); }

  double cdf(double x) const {
    if (x <= 0.0) return 0.0;
    const double d = gg_d(), m = gg_m();
    const double y = std::pow(x / scale(), m);
    if (kind_ == InnovationKind::exponential) return -std::expm1(-x);
    if (kind_ == InnovationKind::weibull) return -std::expm1(-y);
    return boost::math::gamma_p(d / m, y);
  }

  double survival(double x) const {
    if (x <= 0.0) return 1.0;
    const double d = gg_d(), m = gg_m();
    const double y = std::pow(x / scale(), m);
    if (kind_ == InnovationKind::exponential) return std::exp(-x);
    if (kind_ == InnovationKind::weibull) return std::exp(-y);
    return boost::math::gamma_q(d / m, y);
  }

  // p / S; continuous limit at x = 0.
  double hazard(double x) const {
    if (x < 0.0) throw DomainError("hazard needs a non-negative argument");
    const double d = gg_d(), m = gg_m(), a = scale();
    if (x == 0.0) {
      if (d < 1.0) return std::numeric_limits<double>::infinity();
      if (d > 1.0) return 0.0;
      return m / (a * std::tgamma(1.0 / m));
    }
    if (kind_ == InnovationKind::exponential) return 1.0;
    if (kind_ == InnovationKind::weibull) return (m / a) * std::pow(x / a, m - 1.0);
    const double s = survival(x);
    if (s > 0.0) return std::exp(log_density(x) - std::log(s));
    // Far tail: dominant term of the generalized-gamma hazard.
    return (m / a) * std::pow(x / a, m - 1.0);
  }

  // E(eps^2).
  double second_moment() const {
    const double d = gg_d(), m = gg_m();
    return std::exp(std::lgamma((d + 2.0) / m) + std::lgamma(d / m) - 2.0 * std::lgamma((d + 1.0) / m));
  }

  double sample(Rng& rng) const {
    switch (kind_) {
      case InnovationKind::exponential: return std::exponential_distribution<double>(1.0)(rng);
      case InnovationKind::weibull: return std::weibull_distribution<double>(shapes_[0], scale())(rng);
      case InnovationKind::gamma: return std::gamma_distribution<double>(shapes_[0], 1.0 / shapes_[0])(rng);
      case InnovationKind::generalized_gamma: {
        const double d = shapes_[0], m = shapes_[1];
        const double g = std::gamma_distribution<double>(d / m, 1.0)(rng);
        return scale() * std::pow(g, 1.0 / m);
      }
    }
    return 1.0;
  }

  std::string name() const {
    std::string s = to_string(kind_);
    if (!shapes_.empty()) {
      s += "(";
      for (std::size_t i = 0; i < shapes_.size(); ++i) s += (i ? "," : "") + std::to_string(shapes_[i]);
      s += ")";
    }
    return s;
  }

 private:
  InnovationFamily(InnovationKind kind, std::vector<double> shapes) : kind_(kind), shapes_(std::move(shapes)) {
    if (shapes_.size() != shape_count(kind_)) throw ParameterError("wrong number of shape parameters");
    for (double s : shapes_)
      if (!(s > 0.0) || !std::isfinite(s)) throw ParameterError("innovation shapes must be positive");
  }

  static void check_positive(double x) {
    if (!(x > 0.0)) throw DomainError("innovation density needs a positive argument");
  }

  double log_density_kernel(double x) const;

  InnovationKind kind_;
  std::vector<double> shapes_;
};

// Log density of the unit-mean family with shapes given as (possibly dual)
// scalars. Constants depending only on shapes are computed once.
template <typename S>
class LogDensity {
 public:
  LogDensity(InnovationKind kind, const std::vector<S>& shapes) : kind_(kind) {
    using std::lgamma;
    using std::log;
    switch (kind_) {
      case InnovationKind::exponential: break;
      case InnovationKind::weibull: {
        power_ = shapes[0];
        log_scale_ = -lgamma(1.0 + 1.0 / power_);
        shape_d_ = power_;
        constant_ = log(power_) - power_ * log_scale_;
        break;
      }
      case InnovationKind::gamma: {
        shape_d_ = shapes[0];
        power_ = S(1.0);
        log_scale_ = -log(shape_d_);
        constant_ = shape_d_ * log(shape_d_) - lgamma(shape_d_);
        break;
      }
      case InnovationKind::generalized_gamma: {
        shape_d_ = shapes[0];
        power_ = shapes[1];
        const S lg = lgamma(shape_d_ / power_);
        log_scale_ = lg - lgamma((shape_d_ + 1.0) / power_);
        constant_ = log(power_) - shape_d_ * log_scale_ - lg;
        break;
      }
    }
  }

  // log p(x) given log x (callers usually have it already).
  S operator()(const S& x, const S& log_x) const {
    using std::exp;
    switch (kind_) {
      case InnovationKind::exponential: return -x;
      case InnovationKind::gamma: return constant_ + (shape_d_ - 1.0) * log_x - shape_d_ * x;
      case InnovationKind::weibull:
      case InnovationKind::generalized_gamma:
        return constant_ + (shape_d_ - 1.0) * log_x - exp(power_ * (log_x - log_scale_));
    }
    return S(0.0);
  }

 private:
  InnovationKind kind_;
  S shape_d_{1.0};
  S power_{1.0};
  S log_scale_{0.0};
  S constant_{0.0};
};

inline double InnovationFamily::log_density_kernel(double x) const {
  std::vector<double> s(shapes_.begin(), shapes_.end());
  return LogDensity<double>(kind_, s)(x, std::log(x));
}

}  // namespace acdkit
