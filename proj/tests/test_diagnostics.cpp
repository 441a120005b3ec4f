#include <cmath>
#include <random>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "catch_amalgamated.hpp"

#include "acdkit/diagnostics.hpp"

using namespace acdkit;
using Catch::Approx;

namespace {

std::vector<double> exp_draws(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = e(rng);
  return x;
}

}  // namespace

TEST_CASE("Ljung-Box by hand and its 5% critical value") {
  const std::vector<double> x{1, 3, 2, 5, 4, 6};
  // mean 3.5; deviations -2.5 -0.5 -1.5 1.5 0.5 2.5; sum of squares 17.5
  const double r1 = (1.25 + 0.75 - 2.25 + 0.75 + 1.25) / 17.5;
  const auto lb = diag::ljung_box(x, 1);
  CHECK(lb.q == Approx(6.0 * 8.0 * r1 * r1 / 5.0));
  const boost::math::chi_squared_distribution<double> chi(20.0);
  CHECK(diag::kLjungBox20Critical5 == Approx(boost::math::quantile(chi, 0.95)).margin(0.005));
}

TEST_CASE("excess dispersion statistic by hand") {
  const std::vector<double> x{0.5, 1.5, 1.0, 3.0};
  // mean 1.5, s^2 = (1 + 0 + 0.25 + 2.25) / 3
  const double s2 = 3.5 / 3.0;
  const auto r = diag::excess_dispersion_test(x);
  CHECK(r.statistic == Approx(2.0 * (s2 - 1.0) / (2.0 * std::sqrt(2.0))));
  CHECK(r.p_value == Approx(std::erfc(std::abs(r.statistic) / std::sqrt(2.0))));
}

TEST_CASE("PIT chi-squared by hand") {
  const std::vector<double> q{0.1, 0.2, 0.6, 0.7, 0.8, 1.0};
  const auto r = diag::pit_chisq(q, 2);
  CHECK(r.statistic == Approx(2.0 * 1.0 / 3.0));
  const std::vector<double> bad{1.2};
  CHECK_THROWS_AS(diag::pit_chisq(bad, 2), DomainError);
}

TEST_CASE("residuals of the true model are the innovations") {
  acd::AcdSpec s;
  s.init = acd::InitRule::unconditional_mean();
  acd::SimulationOptions o;
  o.make_ticks = false;
  const auto sim = acd::simulate(s, 1000, 2, 3, std::nullopt, o);
  const auto r = diag::residuals(s, sim.durations).values;
  REQUIRE(r.size() == sim.innovations.size());
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] == Approx(sim.innovations[i]).epsilon(1e-10));
  const auto rep = diag::diagnose(s, sim.durations, 20, 10, 5);
  CHECK(rep.n == 2000);
  CHECK(rep.acf.size() == 5);
}

TEST_CASE("PIT of the true model passes a Kolmogorov check in most reps") {
  acd::AcdSpec s;
  s.innovation = InnovationFamily::weibull(0.8);
  s.init = acd::InitRule::unconditional_mean();
  acd::SimulationOptions o;
  o.make_ticks = false;
  int pass = 0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    auto q = diag::pit(acd::simulate(s, 1000, 1, 100 + r, std::nullopt, o).durations, s);
    std::sort(q.begin(), q.end());
    double d = 0.0;
    const double n = static_cast<double>(q.size());
    for (std::size_t i = 0; i < q.size(); ++i)
      d = std::max({d, (static_cast<double>(i) + 1.0) / n - q[i], q[i] - static_cast<double>(i) / n});
    if (d < 1.36 / std::sqrt(n)) ++pass;
  }
  CHECK(pass >= 180);
}

TEST_CASE("dispersion test size and power") {
  int size = 0, power = 0;
  const int reps = 300;
  for (int r = 0; r < reps; ++r) {
    if (diag::excess_dispersion_test(exp_draws(10000, 500 + r)).p_value < 0.05) ++size;
    Rng rng = make_rng(900 + r);
    const auto w = InnovationFamily::weibull(0.7);
    std::vector<double> x(10000);
    for (auto& v : x) v = w.sample(rng);
    if (diag::excess_dispersion_test(x).p_value < 0.05) ++power;
  }
  CHECK(size / static_cast<double>(reps) == Approx(0.05).margin(0.03));
  CHECK(power / static_cast<double>(reps) > 0.9);
}

TEST_CASE("Ljung-Box detects dependence") {
  acd::AcdSpec s;
  s.omega = 0.1;
  s.alpha = {0.2};
  s.beta = {0.7};
  acd::SimulationOptions o;
  o.make_ticks = false;
  const auto x = acd::simulate(s, 5000, 1, 7, std::nullopt, o).durations.values();
  CHECK(diag::ljung_box(x, 20).p_value < 1e-6);
  CHECK(diag::ljung_box(exp_draws(5000, 8), 20).p_value > 1e-3);
}

TEST_CASE("correlogram layout") {
  const auto x = exp_draws(100, 9);
  const auto c = diag::correlogram(x, 3, true);
  REQUIRE(c.size() == 4);
  CHECK(c[0] == std::pair<std::size_t, double>{0, 1.0});
  CHECK(c[3].first == 3);
}
