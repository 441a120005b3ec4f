#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "acdkit/acd.hpp"
#include "acdkit/diagnostics.hpp"
#include "acdkit/durations.hpp"
#include "acdkit/error.hpp"
#include "acdkit/estimation.hpp"
#include "acdkit/gof.hpp"
#include "acdkit/seasonality.hpp"
#include "acdkit/serialize.hpp"
#include "acdkit/ticks.hpp"

namespace acdkit::cli {

namespace fs = std::filesystem;
using io::Json;

enum ExitCode : int { kOk = 0, kInputError = 2, kDataQuality = 3, kStageFailure = 4, kInvalidModel = 5 };

class CommandError : public std::runtime_error {
 public:
  CommandError(int code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  int code() const noexcept { return code_; }

 private:
  int code_;
};

inline constexpr const char* kCacheEnv = "ACDKIT_CACHE_DIR";

inline Json default_config() {
  return Json::parse(R"({
    "input": null,
    "output_dir": "acdkit_out",
    "seed": 1,
    "threads": 1,
    "session": {"open": 34200, "close": 57600},
    "ingest": {"max_reject_fraction": 0.01},
    "simulate": {
      "model": {"omega": 0.1, "alpha": [0.1], "beta": [0.8], "innovation": {"family": "exponential"}},
      "n_days": 5, "n_per_day": 5000, "profile": null,
      "start_price": 100.0, "price_volatility": 0.0001, "volume": 100.0
    },
    "durations": {"mode": "trade", "T": 2, "price_threshold": 0.0, "volume_threshold": 0.0,
                  "drop_zero": false, "cap": null, "lb_lags": 20},
    "deseason": {"form": "cubic_spline", "bin_minutes": 15, "fourier_order": 3},
    "fit": {"model": {"omega": 0.1, "alpha": [0.1], "beta": [0.8], "innovation": {"family": "exponential"}},
            "n_starts": 5, "jitter": 0.2, "normalize": true},
    "diagnose": {"fit": null, "lb_lags": 20, "pit_bins": 20, "acf_lags": 50},
    "gof": {"families": ["exponential", "weibull", "gamma", "generalized_pareto"], "replicates": 1000,
            "level": 0.05, "protocol": "estimated", "sqrt_n_scaled": true, "gpd_location": 0.0,
            "max_table_n": 5000, "within_day": false, "min_day_obs": 20, "day_replicates": 200},
    "pipeline": {"T": [13, 67, 134, 400], "drop_zero": true, "cap": 3.0,
                 "profile": {"form": "cubic_spline", "bin_minutes": 15, "fourier_order": 3},
                 "families": ["exponential", "weibull", "gamma"], "orders": [[1, 1], [2, 1]],
                 "init": {"rule": "first_window_mean", "window_minutes": 15},
                 "n_starts": 5, "lb_lags": 20, "pit_bins": 20, "acf_lags": 50}
  })");
}

// Defaults, then the config file, then flag overrides (flags win).
inline Json merge_config(const Json& file_config, const Json& overrides) {
  Json c = default_config();
  c.merge_patch(file_config);
  c.merge_patch(overrides);
  return c;
}

inline Json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CommandError(kInputError, "cannot read config file " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw CommandError(kInputError, "config file " + path + " is not valid JSON: " + e.what());
  }
}

namespace detail {

inline std::string require_input(const Json& c) {
  if (!c.contains("input") || c["input"].is_null()) throw CommandError(kInputError, "no input file given");
  return c["input"].get<std::string>();
}

inline std::uint64_t require_seed(const Json& c) {
  if (!c.contains("seed") || c["seed"].is_null()) throw CommandError(kInputError, "a seed is required");
  const auto s = c["seed"].get<std::int64_t>();
  if (s <= 0) throw CommandError(kInputError, "seed must be positive");
  return static_cast<std::uint64_t>(s);
}

inline fs::path output_dir(const Json& c) {
  fs::path dir = c.value("output_dir", std::string("acdkit_out"));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw CommandError(kInputError, "cannot create output directory " + dir.string());
  return dir;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CommandError(kInputError, "cannot read " + path);
  return in;
}

inline void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw CommandError(kInputError, "cannot write " + p.string());
  out << text;
}

inline void write_json(const fs::path& p, const Json& j) { write_text(p, j.dump(2) + "\n"); }

inline unsigned threads(const Json& c) { return static_cast<unsigned>(std::max<std::int64_t>(1, c.value("threads", 1))); }

inline Session session(const Json& c) { return c.contains("session") ? io::session_from_json(c["session"]) : Session{}; }

inline std::optional<double> optional_number(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

inline std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

inline IngestResult read_ticks(const std::string& path, const Session& s) {
  auto in = open_input(path);
  auto r = parse_tick_csv(in, s);
  if (r.report.rows_read == 0) throw CommandError(kInputError, path + " holds no tick rows");
  return r;
}

inline DurationSeries read_durations(const std::string& path) {
  auto in = open_input(path);
  try {
    return parse_duration_csv(in);
  } catch (const ValidationError& e) {
    throw CommandError(kInputError, path + ": " + e.what());
  }
}

// Runs one pipeline stage, turning any failure into exit code 4 naming it.
template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const CommandError& e) {
    throw CommandError(kStageFailure, "stage '" + name + "' failed: " + e.what());
  } catch (const std::exception& e) {
    throw CommandError(kStageFailure, "stage '" + name + "' failed: " + e.what());
  }
}

inline std::string curve_csv(const seasonal::DiurnalProfile& p) {
  std::ostringstream out;
  out << "time,factor\n";
  const auto& s = p.session();
  for (double t = s.open; t <= s.close + 1e-9; t += 60.0) out << format_number(t) << ',' << format_number(p(t)) << '\n';
  return out.str();
}

inline seasonal::DiurnalProfile estimate_profile(const DurationSeries& series, const Json& pc, const Session& s) {
  const auto form = pc.value("form", std::string("cubic_spline"));
  if (form == "cubic_spline") return seasonal::estimate_spline_profile(series, pc.value("bin_minutes", 15), s);
  if (form == "fourier") return seasonal::estimate_fourier_profile(series, pc.value("fourier_order", 3), s);
  throw CommandError(kInputError, "unknown profile form '" + form + "'");
}

inline acd::AcdSpec model_from(const Json& j, const Session& s) {
  acd::AcdSpec base;
  base.session = s;
  try {
    return io::spec_from_json(j, base);
  } catch (const Error& e) {
    throw CommandError(kInvalidModel, std::string("invalid model: ") + e.what());
  } catch (const Json::exception& e) {
    throw CommandError(kInvalidModel, std::string("invalid model: ") + e.what());
  }
}

// Start values for an (m, q) template: alpha = 0.1, 0.05, ...; beta sums to
// 0.8 minus the extra alphas.
inline acd::AcdSpec order_template(InnovationKind family, std::size_t m, std::size_t q, const acd::InitRule& init,
                                   const Session& s) {
  acd::AcdSpec spec;
  spec.omega = 0.1;
  spec.alpha.assign(m, 0.05);
  spec.alpha[0] = 0.1;
  spec.beta.assign(q, 0.05);
  spec.beta[0] = 0.8 - 0.05 * static_cast<double>(m - 1) - 0.05 * static_cast<double>(q - 1);
  spec.innovation = InnovationFamily::make(family, std::vector<double>(InnovationFamily::shape_count(family), 1.0));
  spec.init = init;
  spec.session = s;
  return spec;
}

// Table layout: omega, alpha1, beta1, alpha2 (and further lags), then
// sample size, LL, BIC and the residual Ljung-Box statistic.
inline std::string render_table(const std::string& title, const std::vector<est::FitResult>& fits,
                                const std::vector<double>& lb) {
  std::size_t max_m = 1, max_q = 1;
  for (const auto& f : fits) {
    max_m = std::max(max_m, f.spec.m());
    max_q = std::max(max_q, f.spec.q());
  }
  const std::size_t w0 = 14, w = 22;
  std::ostringstream out;
  out << title << "\n";
  out << pad("", w0);
  for (const auto& f : fits) out << pad(f.spec.label(), w);
  out << "\n";
  auto coef_row = [&](const std::string& name, auto pick) {
    out << pad(name, w0);
    for (const auto& f : fits) {
      const auto [v, se] = pick(f);
      std::string cell;
      if (std::isfinite(v)) cell = fmt("%.4f", v) + (std::isfinite(se) ? " (" + fmt("%.4f", se) + ")" : "");
      out << pad(cell, w);
    }
    out << "\n";
  };
  auto se_at = [](const est::FitResult& f, std::size_t i) {
    return i < f.std_errors.size() ? f.std_errors[i] : std::numeric_limits<double>::quiet_NaN();
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto alpha = [&](std::size_t j) {
    return [&, j](const est::FitResult& f) {
      return j < f.spec.m() ? std::pair{f.spec.alpha[j], se_at(f, 1 + j)} : std::pair{nan, nan};
    };
  };
  auto beta = [&](std::size_t j) {
    return [&, j](const est::FitResult& f) {
      return j < f.spec.q() ? std::pair{f.spec.beta[j], se_at(f, 1 + f.spec.m() + j)} : std::pair{nan, nan};
    };
  };
  coef_row("omega", [&](const est::FitResult& f) { return std::pair{f.spec.omega, se_at(f, 0)}; });
  coef_row("alpha_1", alpha(0));
  coef_row("beta_1", beta(0));
  for (std::size_t j = 1; j < max_m; ++j) coef_row("alpha_" + std::to_string(j + 1), alpha(j));
  for (std::size_t j = 1; j < max_q; ++j) coef_row("beta_" + std::to_string(j + 1), beta(j));
  out << "Diagnostics\n";
  auto stat_row = [&](const std::string& name, auto value) {
    out << pad(name, w0);
    for (std::size_t i = 0; i < fits.size(); ++i) out << pad(value(i), w);
    out << "\n";
  };
  stat_row("Sample size", [&](std::size_t i) { return std::to_string(fits[i].n_obs); });
  stat_row("LL", [&](std::size_t i) { return fmt("%.0f", fits[i].loglik); });
  stat_row("BIC", [&](std::size_t i) { return fmt("%.0f", fits[i].bic); });
  stat_row("LB", [&](std::size_t i) { return fmt("%.0f", lb[i]); });
  return out.str();
}

inline std::string correlogram_csv(const std::vector<std::string>& names, const std::vector<std::vector<double>>& cols) {
  std::ostringstream out;
  out << "lag";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  std::size_t L = 0;
  for (const auto& c : cols) L = std::max(L, c.size());
  for (std::size_t k = 0; k < L; ++k) {
    out << (k + 1);
    for (const auto& c : cols) out << ',' << (k < c.size() ? format_number(c[k]) : std::string());
    out << '\n';
  }
  return out.str();
}

}  // namespace detail

// ---------------------------------------------------------------- ingest

inline int cmd_ingest(const Json& c, std::ostream& log) {
  const auto path = detail::require_input(c);
  const auto s = detail::session(c);
  const auto r = detail::read_ticks(path, s);
  const auto dir = detail::output_dir(c);
  detail::write_json(dir / "ingest_report.json", io::ingest_report_json(r.report));
  log << "rows read " << r.report.rows_read << ", accepted " << r.report.rows_accepted << ", rejected "
      << r.report.rejects.size() << ", days " << r.days.size() << "\n";
  const double limit = c["ingest"].value("max_reject_fraction", 0.01);
  if (r.report.reject_fraction() > limit) {
    log << "reject fraction " << r.report.reject_fraction() << " exceeds " << limit << "\n";
    for (const auto& x : r.report.rejects) log << "  line " << x.line << ": " << x.reason << "\n";
    return kDataQuality;
  }
  std::ostringstream csv;
  write_tick_csv(csv, r.days);
  detail::write_text(dir / "ticks.csv", csv.str());
  return kOk;
}

// ---------------------------------------------------------------- simulate

inline int cmd_simulate(const Json& c, std::ostream& log) {
  const auto seed = detail::require_seed(c);
  const auto s = detail::session(c);
  const auto& sc = c["simulate"];
  const auto spec = detail::model_from(sc["model"], s);
  if (!spec.weakly_stationary()) throw CommandError(kInvalidModel, "model " + spec.label() + " is not stationary");
  std::optional<seasonal::DiurnalProfile> profile;
  if (sc.contains("profile") && !sc["profile"].is_null()) {
    try {
      profile = io::profile_from_json(sc["profile"]);
    } catch (const std::exception& e) {
      throw CommandError(kInputError, std::string("invalid profile: ") + e.what());
    }
  }
  const auto n_days = sc.value("n_days", std::size_t{5});
  const auto n_per_day = sc.value("n_per_day", std::size_t{5000});
  if (n_days == 0 || n_per_day == 0) throw CommandError(kInputError, "n_days and n_per_day must be positive");
  acd::SimulationOptions opt;
  opt.start_price = sc.value("start_price", 100.0);
  opt.price_volatility = sc.value("price_volatility", 1e-4);
  opt.volume = sc.value("volume", 100.0);
  const auto sim = acd::simulate(spec, n_per_day, n_days, seed, profile, opt);
  const auto dir = detail::output_dir(c);
  std::ostringstream csv;
  write_tick_csv(csv, sim.ticks);
  detail::write_text(dir / "ticks.csv", csv.str());
  std::size_t n_ticks = 0;
  for (const auto& d : sim.ticks) n_ticks += d.size();
  Json manifest{{"spec", io::spec_json(spec)},
                {"seed", seed},
                {"n_days", n_days},
                {"n_per_day", n_per_day},
                {"profile", profile ? io::profile_json(*profile) : Json(nullptr)},
                {"start_price", opt.start_price},
                {"price_volatility", opt.price_volatility},
                {"volume", opt.volume},
                {"n_ticks", n_ticks}};
  detail::write_json(dir / "manifest.json", manifest);
  log << "simulated " << spec.label() << ": " << n_ticks << " ticks over " << n_days << " days\n";
  return kOk;
}

// ---------------------------------------------------------------- durations

inline int cmd_durations(const Json& c, std::ostream& log) {
  const auto path = detail::require_input(c);
  const auto s = detail::session(c);
  const auto& dc = c["durations"];
  const auto r = detail::read_ticks(path, s);
  if (r.days.empty()) throw CommandError(kInputError, path + " holds no valid ticks");
  const auto mode = dc.value("mode", std::string("trade"));
  DurationSeries series;
  try {
    if (mode == "trade") {
      series = build_for_days(r.days, [](const TickDay& d) { return compute_trade_durations(d); });
    } else if (mode == "aggregate") {
      const int T = dc.value("T", 2);
      series = build_for_days(r.days, [T](const TickDay& d) { return aggregate_transactions(d, T); });
    } else if (mode == "price") {
      const double C = dc.value("price_threshold", 0.0);
      series = build_for_days(r.days, [C](const TickDay& d) { return thin_by_price(d, C); });
    } else if (mode == "volume") {
      const double V = dc.value("volume_threshold", 0.0);
      series = build_for_days(r.days, [V](const TickDay& d) { return thin_by_volume(d, V); });
    } else {
      throw CommandError(kInputError, "unknown durations mode '" + mode + "'");
    }
    FilterPolicy policy{dc.value("drop_zero", false), detail::optional_number(dc, "cap")};
    series = apply_filter(series, policy);
  } catch (const ParameterError& e) {
    throw CommandError(kInputError, e.what());
  }
  if (series.empty()) throw CommandError(kDataQuality, "no durations left after thinning and filtering");
  const auto dir = detail::output_dir(c);
  std::ostringstream csv;
  write_duration_csv(csv, series);
  detail::write_text(dir / "durations.csv", csv.str());
  const auto summary = describe(series, dc.value("lb_lags", std::size_t{20}));
  detail::write_json(dir / "summary.json", io::summary_json(summary));
  log << series.size() << " durations, mean " << summary.mean << ", sd " << summary.sd << "\n";
  return kOk;
}

// ---------------------------------------------------------------- deseason

inline int cmd_deseason(const Json& c, std::ostream& log) {
  const auto series = detail::read_durations(detail::require_input(c));
  const auto s = detail::session(c);
  const auto profile = detail::estimate_profile(series, c["deseason"], s);
  const auto adjusted = seasonal::deseasonalize(series, profile);
  const auto dir = detail::output_dir(c);
  detail::write_json(dir / "profile.json", io::profile_json(profile));
  detail::write_text(dir / "profile_curve.csv", detail::curve_csv(profile));
  std::ostringstream csv;
  write_duration_csv(csv, adjusted);
  detail::write_text(dir / "durations_adjusted.csv", csv.str());
  log << "deseasonalized " << adjusted.size() << " durations\n";
  return kOk;
}

// ---------------------------------------------------------------- fit

inline int cmd_fit(const Json& c, std::ostream& log) {
  const auto series = detail::read_durations(detail::require_input(c));
  const auto s = detail::session(c);
  const auto& fc = c["fit"];
  const auto tmpl = detail::model_from(fc["model"], s);
  est::FitOptions opt;
  opt.n_starts = fc.value("n_starts", 5);
  opt.jitter = fc.value("jitter", 0.2);
  opt.seed = detail::require_seed(c);
  opt.threads = detail::threads(c);
  est::FitResult fit;
  try {
    fit = fc.value("normalize", true) ? est::fit_normalized(series, tmpl, opt) : est::fit_mle(series, tmpl, opt);
  } catch (const ParameterError& e) {
    throw CommandError(kInvalidModel, e.what());
  }
  const auto dir = detail::output_dir(c);
  detail::write_json(dir / "fit.json", io::fit_json(fit));
  const double scale = fit.normalization_constant;
  std::vector<double> v = series.values();
  for (auto& x : v) x /= scale;
  const auto lb = diag::ljung_box(diag::residuals(fit.spec, series.with_values(v, series.state())).values, 20);
  detail::write_text(dir / "table.txt", detail::render_table(fit.spec.label(), {fit}, {lb.q}));
  log << fit.spec.label() << ": LL " << fit.loglik << ", BIC " << fit.bic << "\n";
  return kOk;
}

// ---------------------------------------------------------------- diagnose

inline int cmd_diagnose(const Json& c, std::ostream& log) {
  const auto series = detail::read_durations(detail::require_input(c));
  const auto& dc = c["diagnose"];
  if (!dc.contains("fit") || dc["fit"].is_null()) throw CommandError(kInputError, "diagnose needs a fit file");
  auto in = detail::open_input(dc["fit"].get<std::string>());
  Json fj;
  try {
    fj = Json::parse(in);
  } catch (const Json::exception& e) {
    throw CommandError(kInputError, std::string("fit file is not valid JSON: ") + e.what());
  }
  const auto spec = detail::model_from(fj.at("spec"), detail::session(c));
  const double scale = fj.value("normalization_constant", 1.0);
  std::vector<double> v = series.values();
  for (auto& x : v) x /= scale;
  const auto scaled = series.with_values(v, series.state());
  const auto rep = diag::diagnose(spec, scaled, dc.value("lb_lags", std::size_t{20}), dc.value("pit_bins", std::size_t{20}),
                                  dc.value("acf_lags", std::size_t{50}));
  const auto dir = detail::output_dir(c);
  detail::write_json(dir / "diagnostics.json", io::diagnostics_json(rep));
  detail::write_text(dir / "correlogram.csv", detail::correlogram_csv({"residual_acf"}, {rep.acf}));
  log << "LB(" << rep.lb.lags << ") " << rep.lb.q << ", dispersion " << rep.dispersion.statistic << ", PIT chi2 "
      << rep.pit_chi2.statistic << "\n";
  return kOk;
}

// ---------------------------------------------------------------- gof

namespace detail {

inline std::size_t table_n(std::size_t n, std::size_t max_n) {
  if (n <= 1000) return n;
  const double mag = std::pow(10.0, std::floor(std::log10(static_cast<double>(n))) - 1.0);
  const auto b = static_cast<std::size_t>(std::llround(std::round(static_cast<double>(n) / mag) * mag));
  return std::min(b, std::max<std::size_t>(max_n, 1000));
}

// Whether a cached table was generated under the same law as `want`. Under
// re-estimation the statistics depend only on the shape, so scale and mean
// are ignored for that protocol.
inline bool provenance_matches(const gof::CriticalValueTable& t, const gof::NullDistribution& want,
                               gof::McProtocol protocol) {
  if (t.generating_params.size() != want.params.size()) return false;
  auto close = [](double a, double b) { return std::abs(a - b) <= 0.05 * std::max(std::abs(a), std::abs(b)) + 1e-12; };
  for (std::size_t j = 0; j < want.params.size(); ++j) {
    const bool shape = (want.family == gof::NullFamily::weibull || want.family == gof::NullFamily::gamma ||
                        want.family == gof::NullFamily::generalized_pareto) &&
                       j == 1;
    const bool location = want.family == gof::NullFamily::generalized_pareto && j == 2;
    if (protocol == gof::McProtocol::estimated && !shape && !location) continue;
    if (location ? t.generating_params[j] != want.params[j] : !close(t.generating_params[j], want.params[j]))
      return false;
  }
  return true;
}

inline gof::CriticalValueTable cached_table(const gof::NullDistribution& fitted, std::size_t n, std::size_t M,
                                            std::uint64_t seed, const gof::McOptions& opt, std::ostream& log) {
  const char* env = std::getenv(kCacheEnv);
  fs::path file;
  if (env && *env) {
    file = fs::path(env) / ("cv_" + std::string(gof::to_string(fitted.family)) + "_n" + std::to_string(n) + "_M" +
                            std::to_string(M) + "_seed" + std::to_string(seed) + "_" +
                            gof::to_string(opt.protocol) + (opt.sqrt_n_scaled ? "" : "_unscaled") + ".json");
    std::ifstream in(file);
    if (in) {
      try {
        const auto t = io::critical_table_from_json(Json::parse(in));
        if (t.n == n && t.replicates == M && t.seed == seed && t.protocol == opt.protocol &&
            t.sqrt_n_scaled == opt.sqrt_n_scaled && provenance_matches(t, fitted, opt.protocol))
          return t;
        log << "warning: cached table " << file.string() << " has different provenance; regenerating\n";
      } catch (const std::exception&) {
        log << "warning: cached table " << file.string() << " is unreadable; regenerating\n";
      }
    }
  }
  const auto t = gof::mc_critical_values(fitted, n, M, {0.05, 0.025, 0.01}, seed, opt);
  if (!file.empty()) {
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
    std::ofstream out(file);
    if (out) out << io::critical_table_json(t).dump(2) << "\n";
  }
  return t;
}

}  // namespace detail

inline int cmd_gof(const Json& c, std::ostream& log) {
  const auto series = detail::read_durations(detail::require_input(c));
  const auto seed = detail::require_seed(c);
  const auto& gc = c["gof"];
  const double level = gc.value("level", 0.05);
  const auto M = gc.value("replicates", std::size_t{1000});
  const auto protocol_name = gc.value("protocol", std::string("estimated"));
  if (protocol_name != "estimated" && protocol_name != "fixed")
    throw CommandError(kInputError, "protocol must be 'estimated' or 'fixed'");
  gof::McOptions mc;
  mc.protocol = protocol_name == "estimated" ? gof::McProtocol::estimated : gof::McProtocol::fixed;
  mc.sqrt_n_scaled = gc.value("sqrt_n_scaled", true);
  mc.threads = detail::threads(c);
  mc.gpd_location = gc.value("gpd_location", 0.0);

  std::vector<double> x;
  for (double v : series.values())
    if (v > 0.0) x.push_back(v);
  if (x.size() < 2) throw CommandError(kDataQuality, "fewer than two positive durations");

  const auto dir = detail::output_dir(c);
  Json summary = Json::array();
  std::ostringstream table;
  table << detail::pad("family", 20) << detail::pad("loglik", 16);
  for (auto st : gof::kAllStatistics) table << detail::pad(gof::to_string(st), 20);
  table << "\n";
  std::uint64_t fam_index = 0;
  for (const auto& fam_name : gc["families"].get<std::vector<std::string>>()) {
    gof::NullFamily fam;
    try {
      fam = io::parse_null_family(fam_name);
    } catch (const ParameterError& e) {
      throw CommandError(kInputError, e.what());
    }
    const auto fitted = gof::fit_null(x, fam, {.fixed_shape = std::nullopt, .gpd_location = mc.gpd_location});
    const auto n_table = detail::table_n(x.size(), gc.value("max_table_n", std::size_t{5000}));
    const auto cv = detail::cached_table(fitted, n_table, M, mix_seed(seed, fam_index++), mc, log);
    const auto rep = gof::gof_test(x, fam, cv, level, mc.gpd_location);
    Json j = io::gof_report_json(rep);
    j["critical_value_table"] = io::critical_table_json(cv);
    if (gc.value("within_day", false)) {
      gof::WithinDayOptions wd;
      wd.replicates = gc.value("day_replicates", std::size_t{200});
      wd.seed = mix_seed(seed, 1000 + fam_index);
      wd.min_obs = gc.value("min_day_obs", std::size_t{20});
      wd.threads = mc.threads;
      wd.gpd_location = mc.gpd_location;
      std::vector<DaySegment> segs;
      for (const auto& seg : series.segments()) {
        DaySegment d{seg.day_index, {}};
        for (const auto& e : seg.entries)
          if (e.duration > 0.0) d.entries.push_back(e);
        segs.push_back(std::move(d));
      }
      const auto res = gof::within_day_share(DurationSeries(series.kind(), series.state(), segs, false), fam, level, wd);
      j["within_day"] = {{"n0", res.n0}, {"n_days", res.n_days}, {"share", res.share}};
    }
    detail::write_json(dir / ("gof_" + fam_name + ".json"), j);
    summary.push_back({{"family", fam_name}, {"reject", j["reject"]}});
    table << detail::pad(fam_name, 20) << detail::pad(detail::fmt("%.2f", rep.fitted.loglik), 16);
    for (auto st : gof::kAllStatistics) {
      const auto i = static_cast<std::size_t>(st);
      table << detail::pad(detail::fmt("%.4f", rep.statistics.value(st)) + " (" + detail::fmt("%.4f", rep.critical[i]) + ")" +
                               (rep.reject[i] ? "*" : ""),
                           20);
    }
    table << "\n";
  }
  detail::write_text(dir / "gof_table.txt", table.str());
  detail::write_json(dir / "gof_summary.json", summary);
  log << table.str();
  return kOk;
}

// ---------------------------------------------------------------- pipeline

inline int cmd_pipeline(const Json& c, std::ostream& log) {
  const auto path = detail::require_input(c);
  const auto seed = detail::require_seed(c);
  const auto s = detail::session(c);
  const auto& pc = c["pipeline"];
  const auto dir = detail::output_dir(c);
  const auto threads = detail::threads(c);

  const auto ticks = detail::stage("ingest", [&] {
    auto r = detail::read_ticks(path, s);
    if (r.report.reject_fraction() > c["ingest"].value("max_reject_fraction", 0.01))
      throw CommandError(kDataQuality, "too many malformed rows");
    return r;
  });
  const auto raw = detail::stage("durations", [&] {
    return build_for_days(ticks.days, [](const TickDay& d) { return compute_trade_durations(d); });
  });
  const auto filtered = detail::stage("filter", [&] {
    return apply_filter(raw, {pc.value("drop_zero", true), detail::optional_number(pc, "cap")});
  });
  const auto profile = detail::stage("seasonality", [&] { return detail::estimate_profile(filtered, pc["profile"], s); });
  const auto adjusted = detail::stage("deseasonalize", [&] { return seasonal::deseasonalize(filtered, profile); });

  detail::write_json(dir / "profile.json", io::profile_json(profile));
  detail::write_text(dir / "profile_curve.csv", detail::curve_csv(profile));

  std::vector<InnovationKind> families;
  for (const auto& f : pc["families"].get<std::vector<std::string>>()) families.push_back(io::parse_innovation_kind(f));
  std::vector<std::pair<std::size_t, std::size_t>> orders;
  for (const auto& o : pc["orders"]) orders.emplace_back(o.at(0).get<std::size_t>(), o.at(1).get<std::size_t>());
  const auto init = io::init_from_json(pc["init"]);
  const auto lb_lags = pc.value("lb_lags", std::size_t{20});
  const auto pit_bins = pc.value("pit_bins", std::size_t{20});
  const auto acf_lags = pc.value("acf_lags", std::size_t{50});

  Json summary{{"input_rows", ticks.report.rows_read},
               {"rejected_rows", ticks.report.rejects.size()},
               {"days", ticks.days.size()},
               {"raw", io::summary_json(describe(raw, lb_lags))},
               {"filtered", io::summary_json(describe(filtered, lb_lags))},
               {"aggregations", Json::array()}};

  for (const int T : pc["T"].get<std::vector<int>>()) {
    const std::string tag = "T" + std::to_string(T);
    const auto agg = detail::stage("aggregate " + tag, [&] { return aggregate_durations(adjusted, T); });
    const auto norm = detail::stage("normalize " + tag, [&] {
      for (double v : agg.values())
        if (!(v > 0.0))
          throw CommandError(kStageFailure, "zero durations violate the model's positivity requirement; set drop_zero");
      return est::normalize(agg);
    });
    std::vector<est::FitResult> fits;
    std::vector<diag::DiagnosticReport> reps;
    std::vector<double> lbq;
    for (const auto fam : families) {
      for (const auto& [m, q] : orders) {
        const auto tmpl = detail::order_template(fam, m, q, init, s);
        auto fit = detail::stage("fit " + tag + " " + tmpl.label(), [&] {
          est::FitOptions opt;
          opt.n_starts = pc.value("n_starts", 5);
          opt.seed = seed;
          opt.threads = threads;
          opt.normalization_constant = norm.scale;
          return est::fit_mle(norm.series, tmpl, opt);
        });
        auto rep = detail::stage("diagnose " + tag + " " + tmpl.label(),
                                 [&] { return diag::diagnose(fit.spec, norm.series, lb_lags, pit_bins, acf_lags); });
        lbq.push_back(rep.lb.q);
        fits.push_back(std::move(fit));
        reps.push_back(std::move(rep));
      }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < fits.size(); ++i)
      if (fits[i].bic < fits[best].bic) best = i;

    const auto tdir = dir / tag;
    detail::write_text(tdir / "table.txt",
                       detail::render_table(tag + " transaction-aggregated durations", fits, lbq));
    Json fj = Json::array(), dj = Json::array();
    std::vector<std::string> names{"durations"};
    std::vector<std::vector<double>> cols{
        stats::autocorrelations(norm.series.values(), std::min(acf_lags, norm.series.size() - 1))};
    for (std::size_t i = 0; i < fits.size(); ++i) {
      fj.push_back(io::fit_json(fits[i]));
      Json d = io::diagnostics_json(reps[i]);
      d["model"] = fits[i].spec.label();
      dj.push_back(d);
      names.push_back(fits[i].spec.label());
      cols.push_back(reps[i].acf);
    }
    detail::write_json(tdir / "fits.json", fj);
    detail::write_json(tdir / "diagnostics.json", dj);
    detail::write_text(tdir / "correlogram.csv", detail::correlogram_csv(names, cols));
    summary["aggregations"].push_back({{"T", T},
                                       {"n", agg.size()},
                                       {"normalization_constant", norm.scale},
                                       {"summary", io::summary_json(describe(agg, lb_lags))},
                                       {"best_bic", fits[best].spec.label()}});
    log << tag << ": best by BIC " << fits[best].spec.label() << "\n";
  }
  detail::write_json(dir / "summary.json", summary);
  return kOk;
}

// Maps library errors to exit codes and prints the message.
template <typename F>
int run_guarded(F&& f, std::ostream& err) {
  try {
    return f();
  } catch (const CommandError& e) {
    err << "error: " << e.what() << "\n";
    return e.code();
  } catch (const NonStationaryError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidModel;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const Json::exception& e) {
    err << "error: bad configuration: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kStageFailure;
  }
}

inline int dispatch(const std::string& command, const Json& config, std::ostream& log) {
  return run_guarded(
      [&] {
        if (command == "ingest") return cmd_ingest(config, log);
        if (command == "simulate") return cmd_simulate(config, log);
        if (command == "durations") return cmd_durations(config, log);
        if (command == "deseason") return cmd_deseason(config, log);
        if (command == "fit") return cmd_fit(config, log);
        if (command == "diagnose") return cmd_diagnose(config, log);
        if (command == "gof") return cmd_gof(config, log);
        if (command == "pipeline") return cmd_pipeline(config, log);
        throw CommandError(kInputError, "unknown command '" + command + "'");
      },
      log);
}

}  // namespace acdkit::cli
