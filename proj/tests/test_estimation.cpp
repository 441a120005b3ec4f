#include <cmath>
#include <vector>

#include "catch_amalgamated.hpp"

#include "acdkit/estimation.hpp"

using namespace acdkit;
using Catch::Approx;

namespace {

acd::AcdSpec model(InnovationFamily f, double w = 0.1, double a = 0.1, double b = 0.8) {
  acd::AcdSpec s;
  s.omega = w;
  s.alpha = {a};
  s.beta = {b};
  s.innovation = std::move(f);
  s.init = acd::InitRule::unconditional_mean();
  return s;
}

DurationSeries sim(const acd::AcdSpec& s, std::size_t n, std::uint64_t seed, std::size_t days = 1) {
  acd::SimulationOptions o;
  o.make_ticks = false;
  return acd::simulate(s, n, days, seed, std::nullopt, o).durations;
}

}  // namespace

TEST_CASE("BIC by hand") {
  CHECK(est::bic(-100.0, 3, 1000) == Approx(200.0 + 3.0 * std::log(1000.0)));
  CHECK_THROWS_AS(est::bic(0.0, 1, 0), ParameterError);
}

TEST_CASE("analytic gradient matches finite differences") {
  std::vector<acd::AcdSpec> specs{model(InnovationFamily::exponential()), model(InnovationFamily::weibull(0.8)),
                                  model(InnovationFamily::gamma(1.5)),
                                  model(InnovationFamily::generalized_gamma(1.4, 0.9))};
  auto log1 = model(InnovationFamily::weibull(0.9), 0.02, 0.05, 0.9);
  log1.form = acd::MeanForm::log_type1;
  auto log2 = log1;
  log2.form = acd::MeanForm::log_type2;
  specs.push_back(log1);
  specs.push_back(log2);
  for (const auto& s : specs) {
    INFO(s.label());
    const auto series = sim(s, 400, 3, 2);
    auto tmpl = s;
    tmpl.init = acd::InitRule::sample_mean();
    const auto plan = acd::make_init_plan(tmpl.init, series, tmpl.session);
    est::Vector th = est::to_theta(tmpl);
    th(0) *= 1.1;
    const auto ev = est::evaluate_scores(tmpl, th, series, plan, true);
    CHECK(ev.loglik == Approx(est::evaluate_loglik(tmpl, th, series, plan)).epsilon(1e-12));
    for (Eigen::Index j = 0; j < th.size(); ++j) {
      const double h = 1e-6;
      est::Vector up = th, dn = th;
      up(j) += h;
      dn(j) -= h;
      const double fd =
          (est::evaluate_loglik(tmpl, up, series, plan) - est::evaluate_loglik(tmpl, dn, series, plan)) / (2 * h);
      CHECK(ev.gradient(j) == Approx(fd).epsilon(1e-5).margin(1e-4));
      CHECK(ev.scores.col(j).sum() == Approx(ev.gradient(j)).epsilon(1e-10).margin(1e-9));
    }
  }
}

TEST_CASE("EACD and GACD parameters are recovered") {
  for (const auto& truth : {model(InnovationFamily::exponential()), model(InnovationFamily::gamma(2.0))}) {
    INFO(truth.label());
    const auto series = sim(truth, 20000, 41);
    const auto fit = est::fit_mle(series, truth);
    CHECK(fit.convergence == optim::Status::converged);
    const auto p = fit.parameters();
    const auto t = est::natural_parameters(truth);
    REQUIRE(fit.std_errors.size() == t.size());
    for (std::size_t j = 0; j < t.size(); ++j) CHECK(std::abs(p[j] - t[j]) < 4.0 * fit.std_errors[j]);
    CHECK(fit.bic == Approx(-2.0 * fit.loglik + static_cast<double>(t.size()) * std::log(20000.0)));
  }
}

TEST_CASE("sandwich and Hessian errors agree under correct specification") {
  const auto truth = model(InnovationFamily::exponential());
  const auto fit = est::fit_mle(sim(truth, 30000, 42), truth);
  for (std::size_t j = 0; j < fit.std_errors.size(); ++j)
    CHECK(fit.std_errors[j] / fit.hessian_std_errors[j] == Approx(1.0).margin(0.15));
}

TEST_CASE("nested families never lose likelihood") {
  const auto truth = model(InnovationFamily::weibull(0.8));
  const auto series = sim(truth, 5000, 43);
  est::FitOptions o;
  o.n_starts = 3;
  o.compute_std_errors = false;
  const auto e = est::fit_mle(series, model(InnovationFamily::exponential()), o);
  const auto w = est::fit_mle(series, model(InnovationFamily::weibull(1.0)), o);
  const auto g = est::fit_mle(series, model(InnovationFamily::generalized_gamma(1.0, 1.0)), o);
  CHECK(w.loglik >= e.loglik - 1e-6);
  CHECK(g.loglik >= w.loglik - 1e-6);
  CHECK(w.bic < e.bic);
}

TEST_CASE("fits are deterministic for a seed") {
  const auto truth = model(InnovationFamily::exponential());
  const auto series = sim(truth, 3000, 44);
  est::FitOptions o;
  o.n_starts = 4;
  o.seed = 9;
  o.threads = 2;
  const auto a = est::fit_mle(series, truth, o);
  o.threads = 1;
  const auto b = est::fit_mle(series, truth, o);
  CHECK(a.parameters() == b.parameters());
  CHECK(a.loglik == b.loglik);
  CHECK(a.start_logliks.size() == 4);
}

TEST_CASE("too short a series is refused") {
  const auto truth = model(InnovationFamily::gamma(1.0));
  CHECK_THROWS_AS(est::fit_mle(sim(truth, 39, 45), truth), ParameterError);
  CHECK_NOTHROW(est::fit_mle(sim(truth, 200, 45), truth));
}

TEST_CASE("normalization divides by the sample mean") {
  const auto truth = model(InnovationFamily::exponential(), 3.0, 0.1, 0.8);
  const auto series = sim(truth, 2000, 46);
  const auto n = est::normalize(series);
  CHECK(stats::mean(n.series.values()) == Approx(1.0).epsilon(1e-12));
  CHECK(n.scale == Approx(stats::mean(series.values())));
  const auto fit = est::fit_normalized(series, model(InnovationFamily::exponential()));
  CHECK(fit.normalization_constant == n.scale);
}
