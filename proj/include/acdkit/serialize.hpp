#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "acdkit/acd.hpp"
#include "acdkit/diagnostics.hpp"
#include "acdkit/durations.hpp"
#include "acdkit/error.hpp"
#include "acdkit/estimation.hpp"
#include "acdkit/gof.hpp"
#include "acdkit/seasonality.hpp"
#include "acdkit/ticks.hpp"

namespace acdkit::io {

using Json = nlohmann::ordered_json;

inline InnovationKind parse_innovation_kind(std::string_view s) {
  if (s == "exponential") return InnovationKind::exponential;
  if (s == "weibull") return InnovationKind::weibull;
  if (s == "gamma") return InnovationKind::gamma;
  if (s == "generalized_gamma") return InnovationKind::generalized_gamma;
  throw ParameterError("unknown innovation family '" + std::string(s) + "'");
}

inline acd::MeanForm parse_mean_form(std::string_view s) {
  if (s == "linear") return acd::MeanForm::linear;
  if (s == "log_type1") return acd::MeanForm::log_type1;
  if (s == "log_type2") return acd::MeanForm::log_type2;
  throw ParameterError("unknown mean form '" + std::string(s) + "'");
}

inline gof::NullFamily parse_null_family(std::string_view s) {
  if (s == "exponential") return gof::NullFamily::exponential;
  if (s == "weibull") return gof::NullFamily::weibull;
  if (s == "gamma") return gof::NullFamily::gamma;
  if (s == "generalized_pareto" || s == "gpd") return gof::NullFamily::generalized_pareto;
  if (s == "normal") return gof::NullFamily::normal;
  throw ParameterError("unknown null family '" + std::string(s) + "'");
}

inline const char* to_string(acd::InitRule::Kind k) {
  switch (k) {
    case acd::InitRule::Kind::unconditional_mean: return "unconditional_mean";
    case acd::InitRule::Kind::sample_mean: return "sample_mean";
    case acd::InitRule::Kind::first_window_mean: return "first_window_mean";
  }
  return "?";
}

inline Json session_json(const Session& s) { return {{"open", s.open}, {"close", s.close}}; }

inline Session session_from_json(const Json& j, Session s = {}) {
  if (j.contains("open")) s.open = j.at("open").get<double>();
  if (j.contains("close")) s.close = j.at("close").get<double>();
  if (!(s.close > s.open)) throw ParameterError("session close must follow open");
  return s;
}

inline Json init_json(const acd::InitRule& r) {
  Json j{{"rule", to_string(r.kind)}};
  if (r.kind == acd::InitRule::Kind::first_window_mean) j["window_minutes"] = r.window_minutes;
  return j;
}

inline acd::InitRule init_from_json(const Json& j) {
  const auto rule = j.value("rule", std::string("first_window_mean"));
  if (rule == "unconditional_mean") return acd::InitRule::unconditional_mean();
  if (rule == "sample_mean") return acd::InitRule::sample_mean();
  if (rule == "first_window_mean") return acd::InitRule::first_window_mean(j.value("window_minutes", 15.0));
  throw ParameterError("unknown initialization rule '" + rule + "'");
}

inline Json spec_json(const acd::AcdSpec& s) {
  return {{"label", s.label()},
          {"form", acd::to_string(s.form)},
          {"omega", s.omega},
          {"alpha", s.alpha},
          {"beta", s.beta},
          {"innovation", {{"family", to_string(s.innovation.kind())}, {"shapes", s.innovation.shapes()}}},
          {"init", init_json(s.init)},
          {"session", session_json(s.session)}};
}

// Missing keys keep the values of `base`.
inline acd::AcdSpec spec_from_json(const Json& j, acd::AcdSpec base = {}) {
  if (j.contains("form")) base.form = parse_mean_form(j.at("form").get<std::string>());
  if (j.contains("omega")) base.omega = j.at("omega").get<double>();
  if (j.contains("alpha")) base.alpha = j.at("alpha").get<std::vector<double>>();
  if (j.contains("beta")) base.beta = j.at("beta").get<std::vector<double>>();
  if (j.contains("innovation")) {
    const auto& in = j.at("innovation");
    const auto kind = parse_innovation_kind(in.value("family", std::string("exponential")));
    std::vector<double> shapes = in.value("shapes", std::vector<double>{});
    if (shapes.empty()) shapes.assign(InnovationFamily::shape_count(kind), 1.0);
    if (shapes.size() != InnovationFamily::shape_count(kind))
      throw ParameterError("wrong number of shape parameters for " + std::string(to_string(kind)));
    base.innovation = InnovationFamily::make(kind, shapes);
  }
  if (j.contains("init")) base.init = init_from_json(j.at("init"));
  if (j.contains("session")) base.session = session_from_json(j.at("session"));
  base.validate();
  return base;
}

inline Json profile_json(const seasonal::DiurnalProfile& p) {
  Json j;
  if (p.form() == seasonal::ProfileForm::cubic_spline) {
    j["form"] = "cubic_spline";
    j["nodes"] = {{"times", p.spline_curve().nodes()}, {"values", p.spline_curve().values()}};
  } else {
    const auto& c = p.fourier_coefficients();
    j["form"] = "fourier";
    j["coefficients"] = {{"intercept", c.intercept}, {"trend", c.trend}, {"cosine", c.cosine}, {"sine", c.sine}};
  }
  j["session"] = session_json(p.session());
  return j;
}

inline seasonal::DiurnalProfile profile_from_json(const Json& j) {
  const Session s = j.contains("session") ? session_from_json(j.at("session")) : Session{};
  const auto form = j.at("form").get<std::string>();
  if (form == "cubic_spline") {
    const auto& n = j.at("nodes");
    return seasonal::DiurnalProfile::spline(n.at("times").get<std::vector<double>>(),
                                            n.at("values").get<std::vector<double>>(), s);
  }
  if (form == "fourier") {
    const auto& c = j.at("coefficients");
    seasonal::FourierCoefficients f;
    f.intercept = c.at("intercept").get<double>();
    f.trend = c.value("trend", 0.0);
    f.cosine = c.value("cosine", std::vector<double>{});
    f.sine = c.value("sine", std::vector<double>{});
    return seasonal::DiurnalProfile::fourier(f, s);
  }
  throw ParameterError("unknown profile form '" + form + "'");
}

inline Json fit_json(const est::FitResult& f) {
  Json params = Json::array();
  const auto names = f.names();
  const auto values = f.parameters();
  for (std::size_t j = 0; j < names.size(); ++j) {
    Json p{{"name", names[j]}, {"value", values[j]}};
    if (j < f.std_errors.size()) p["std_error"] = f.std_errors[j];
    if (j < f.hessian_std_errors.size()) p["hessian_std_error"] = f.hessian_std_errors[j];
    params.push_back(p);
  }
  return {{"model", f.spec.label()},
          {"spec", spec_json(f.spec)},
          {"parameters", params},
          {"loglik", f.loglik},
          {"bic", f.bic},
          {"n_obs", f.n_obs},
          {"normalization_constant", f.normalization_constant},
          {"convergence", optim::to_string(f.convergence)},
          {"iterations", f.iterations},
          {"gradient_max_norm", f.gradient_max_norm},
          {"best_start", f.best_start},
          {"start_logliks", f.start_logliks}};
}

inline Json summary_json(const DurationSummary& s) {
  Json j{{"n", s.n}, {"mean", s.mean}, {"sd", s.sd}, {"q05", s.q05}, {"q25", s.q25},
         {"q50", s.q50}, {"q75", s.q75}, {"q95", s.q95}, {"lb_lags", s.lb_lags}};
  j["ljung_box"] = s.ljung_box ? Json(*s.ljung_box) : Json(nullptr);
  return j;
}

inline Json diagnostics_json(const diag::DiagnosticReport& r) {
  return {{"n", r.n},
          {"ljung_box", {{"lags", r.lb.lags}, {"q", r.lb.q}, {"p_value", r.lb.p_value}}},
          {"excess_dispersion", {{"statistic", r.dispersion.statistic}, {"p_value", r.dispersion.p_value}}},
          {"pit_chi2", {{"statistic", r.pit_chi2.statistic}, {"p_value", r.pit_chi2.p_value}}},
          {"acf", r.acf}};
}

inline Json ingest_report_json(const IngestReport& r) {
  Json rejects = Json::array();
  for (const auto& x : r.rejects) rejects.push_back({{"line", x.line}, {"reason", x.reason}});
  return {{"rows_read", r.rows_read},
          {"rows_accepted", r.rows_accepted},
          {"rows_rejected", r.rejects.size()},
          {"reject_fraction", r.reject_fraction()},
          {"header", r.header},
          {"days", r.day_labels},
          {"rejects", rejects}};
}

inline Json null_json(const gof::NullDistribution& d) {
  Json params = Json::array();
  const auto names = d.names();
  for (std::size_t j = 0; j < d.params.size(); ++j) {
    Json p{{"name", names[j]}, {"value", d.params[j]}};
    if (j < d.std_errors.size()) p["std_error"] = d.std_errors[j];
    params.push_back(p);
  }
  return {{"family", gof::to_string(d.family)}, {"parameters", params}, {"loglik", d.loglik}};
}

inline Json critical_table_json(const gof::CriticalValueTable& t) {
  Json values;
  for (auto st : gof::kAllStatistics) values[gof::to_string(st)] = t.values[static_cast<std::size_t>(st)];
  return {{"family", gof::to_string(t.family)},
          {"generating_params", t.generating_params},
          {"protocol", gof::to_string(t.protocol)},
          {"n", t.n},
          {"replicates", t.replicates},
          {"seed", t.seed},
          {"sqrt_n_scaled", t.sqrt_n_scaled},
          {"levels", t.levels},
          {"values", values}};
}

inline gof::CriticalValueTable critical_table_from_json(const Json& j) {
  gof::CriticalValueTable t;
  t.family = parse_null_family(j.at("family").get<std::string>());
  t.generating_params = j.at("generating_params").get<std::vector<double>>();
  const auto protocol = j.at("protocol").get<std::string>();
  if (protocol != "estimated" && protocol != "fixed") throw ParameterError("unknown protocol '" + protocol + "'");
  t.protocol = protocol == "estimated" ? gof::McProtocol::estimated : gof::McProtocol::fixed;
  t.n = j.at("n").get<std::size_t>();
  t.replicates = j.at("replicates").get<std::size_t>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.sqrt_n_scaled = j.at("sqrt_n_scaled").get<bool>();
  t.levels = j.at("levels").get<std::vector<double>>();
  for (auto st : gof::kAllStatistics) {
    auto col = j.at("values").at(gof::to_string(st)).get<std::vector<double>>();
    if (col.size() != t.levels.size()) throw ParameterError("critical-value table is malformed");
    t.values[static_cast<std::size_t>(st)] = std::move(col);
  }
  return t;
}

inline Json gof_report_json(const gof::GofReport& r) {
  Json stats, crit, rej;
  for (auto st : gof::kAllStatistics) {
    const auto i = static_cast<std::size_t>(st);
    stats[gof::to_string(st)] = r.statistics.value(st);
    crit[gof::to_string(st)] = r.critical[i];
    rej[gof::to_string(st)] = r.reject[i];
  }
  return {{"fit", null_json(r.fitted)},
          {"n", r.statistics.n},
          {"sqrt_n_scaled", r.statistics.sqrt_n_scaled},
          {"level", r.level},
          {"statistics", stats},
          {"critical_values", crit},
          {"reject", rej}};
}

}  // namespace acdkit::io
