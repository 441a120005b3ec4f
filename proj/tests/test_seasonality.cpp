#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "catch_amalgamated.hpp"

#include "acdkit/seasonality.hpp"

using namespace acdkit;
using namespace acdkit::seasonal;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;
const Session kSession{};

double tb(double t) { return (t - kSession.open) / kSession.length(); }

// Start times on a fixed grid across the session for several days; each
// duration is truth(t) times a unit-mean draw.
template <typename F>
DurationSeries seasonal_series(F truth, int n_days, double step, std::uint64_t seed, bool noisy = true) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> e(1.0);
  std::vector<DaySegment> segs;
  for (int d = 0; d < n_days; ++d) {
    DaySegment s{d, {}};
    for (double t = kSession.open; t < kSession.close; t += step) {
      const double w = truth(t) * (noisy ? e(rng) : 1.0);
      s.entries.push_back({t, t + w, w});
    }
    segs.push_back(std::move(s));
  }
  return DurationSeries(DurationKind::trade, SeasonalState::raw, std::move(segs), false);
}

}  // namespace

TEST_CASE("natural spline matches a hand-solved three-node case") {
  // On [0,1] the natural spline through (0,0),(1,1),(2,0) is 1.5x - 0.5x^3.
  const NaturalCubicSpline s({0.0, 1.0, 2.0}, {0.0, 1.0, 0.0});
  for (double x : {0.0, 0.25, 0.5, 0.9, 1.0}) CHECK(s(x) == Approx(1.5 * x - 0.5 * x * x * x).margin(1e-14));
  CHECK(s(1.5) == Approx(s(0.5)).margin(1e-14));
}

TEST_CASE("natural spline reproduces linear data and extrapolates linearly") {
  const NaturalCubicSpline s({0.0, 1.0, 3.0, 4.5}, {1.0, 3.0, 7.0, 10.0});
  for (double x : {-2.0, 0.3, 2.2, 4.0, 6.0}) CHECK(s(x) == Approx(1.0 + 2.0 * x).margin(1e-12));
}

TEST_CASE("natural spline interpolates its nodes and has zero end curvature") {
  const std::vector<double> x{0.0, 0.7, 1.1, 2.5, 3.0, 4.2};
  const std::vector<double> y{1.0, -0.5, 2.0, 0.3, 0.9, -1.0};
  const NaturalCubicSpline s(x, y);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(s(x[i]) == Approx(y[i]).margin(1e-12));
  const double h = 1e-4;
  const double d2 = (s(x[0] + 2 * h) - 2 * s(x[0] + h) + s(x[0])) / (h * h);
  CHECK(std::abs(d2) < 1e-2);
  CHECK_THROWS_AS(NaturalCubicSpline({0.0, 0.0}, {1.0, 1.0}), ParameterError);
}

TEST_CASE("constant durations give a flat spline profile") {
  const auto s = seasonal_series([](double) { return 2.5; }, 2, 30.0, 1, false);
  const auto p = estimate_spline_profile(s, 15);
  CHECK(p.spline_curve().nodes().size() == 26);
  for (double t = kSession.open; t <= kSession.close; t += 600.0) CHECK(p(t) == Approx(2.5).margin(1e-12));
}

TEST_CASE("spline profile recovers a smooth diurnal pattern") {
  auto truth = [](double t) { return 1.0 + 0.5 * std::cos(2.0 * kPi * tb(t)); };
  const auto s = seasonal_series(truth, 40, 10.0, 2);
  const auto p = estimate_spline_profile(s, 15);
  double sse = 0.0, ss = 0.0;
  int k = 0;
  for (double t = kSession.open + 450.0; t <= kSession.close - 450.0; t += 60.0, ++k) {
    sse += (p(t) - truth(t)) * (p(t) - truth(t));
    ss += truth(t) * truth(t);
  }
  CHECK(std::sqrt(sse / ss) < 0.05);
}

TEST_CASE("spline profile reports empty bins") {
  std::vector<DaySegment> segs{{0, {{kSession.open + 10.0, kSession.open + 11.0, 1.0}}}};
  const DurationSeries s(DurationKind::trade, SeasonalState::raw, segs);
  CHECK_THROWS_AS(estimate_spline_profile(s, 15), ParameterError);
  CHECK_THROWS_AS(estimate_spline_profile(s, 7), ParameterError);
}

TEST_CASE("Fourier regression is exact on noise-free data") {
  auto truth = [](double t) {
    const double x = tb(t);
    return 2.0 - 0.3 * x + 0.4 * std::cos(2 * kPi * x) - 0.2 * std::sin(2 * kPi * x) + 0.1 * std::cos(4 * kPi * x) +
           0.05 * std::sin(4 * kPi * x);
  };
  const auto s = seasonal_series(truth, 1, 37.0, 3, false);
  const auto c = fourier_regression(s, 2).coefficients;
  CHECK(c.intercept == Approx(2.0).margin(1e-10));
  CHECK(c.trend == Approx(-0.3).margin(1e-10));
  CHECK(c.cosine[0] == Approx(0.4).margin(1e-10));
  CHECK(c.sine[0] == Approx(-0.2).margin(1e-10));
  CHECK(c.cosine[1] == Approx(0.1).margin(1e-10));
  CHECK(c.sine[1] == Approx(0.05).margin(1e-10));
}

TEST_CASE("Fourier regression recovers coefficients within their standard errors") {
  const std::vector<double> beta{1.5, 0.2, 0.3, -0.25, 0.1, 0.05};
  auto truth = [&](double t) {
    const double x = tb(t);
    return beta[0] + beta[1] * x + beta[2] * std::cos(2 * kPi * x) + beta[3] * std::sin(2 * kPi * x) +
           beta[4] * std::cos(4 * kPi * x) + beta[5] * std::sin(4 * kPi * x);
  };
  const auto s = seasonal_series(truth, 20, 20.0, 4);
  const auto r = fourier_regression(s, 2);
  const auto& c = r.coefficients;
  const std::vector<double> est{c.intercept, c.trend, c.cosine[0], c.sine[0], c.cosine[1], c.sine[1]};
  for (std::size_t k = 0; k < beta.size(); ++k) CHECK(std::abs(est[k] - beta[k]) < 3.0 * r.std_errors[k]);

  const auto r0 = fourier_regression(s, 0);
  CHECK(r0.coefficients.order() == 0);
  CHECK(r0.std_errors.size() == 2);
}

TEST_CASE("Fourier profile is floored at a small positive value") {
  FourierCoefficients c;
  c.intercept = -1.0;
  const auto p = DiurnalProfile::fourier(c);
  CHECK(p(kSession.open) == kProfileFloor);
}

TEST_CASE("deseasonalize and reseasonalize are inverse") {
  auto truth = [](double t) { return 1.0 + 0.4 * std::sin(2.0 * kPi * tb(t)); };
  const auto s = seasonal_series(truth, 3, 45.0, 5);
  const auto p = estimate_spline_profile(s, 30);
  const auto adj = deseasonalize(s, p);
  CHECK(adj.state() == SeasonalState::deseasonalized);
  CHECK_THROWS_AS(deseasonalize(adj, p), ParameterError);
  const auto back = reseasonalize(adj, p).values();
  const auto orig = s.values();
  REQUIRE(back.size() == orig.size());
  for (std::size_t i = 0; i < orig.size(); ++i) CHECK(back[i] == Approx(orig[i]).epsilon(1e-12));
}

TEST_CASE("deseasonalized durations have flat bin means") {
  auto truth = [](double t) { return 0.5 + 1.5 * tb(t) * tb(t); };
  const auto s = seasonal_series(truth, 60, 15.0, 6);
  const auto adj = deseasonalize(s, estimate_spline_profile(s, 15));
  std::vector<double> sum(13, 0.0), cnt(13, 0.0);
  for (const auto& seg : adj.segments())
    for (const auto& e : seg.entries) {
      const auto b = std::min<std::size_t>(12, static_cast<std::size_t>((e.start_time - kSession.open) / 1800.0));
      sum[b] += e.duration;
      cnt[b] += 1.0;
    }
  for (std::size_t b = 0; b < 13; ++b) CHECK(sum[b] / cnt[b] == Approx(1.0).margin(0.05));
}
