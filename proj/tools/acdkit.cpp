// acdkit command-line front end. Every subcommand reads an optional JSON
// config (--config); flags given on the command line override it.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "acdkit/cli.hpp"

using acdkit::cli::Json;

namespace {

struct Common {
  std::string config, input, output;
  long long seed = 0;
  unsigned threads = 0;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config, "JSON config file");
  sub->add_option("-i,--input", c.input, "input file");
  sub->add_option("-o,--output", c.output, "output directory");
  sub->add_option("--seed", c.seed, "master seed (positive)");
  sub->add_option("--threads", c.threads, "worker threads");
}

Json common_overrides(CLI::App* sub, const Common& c) {
  Json o = Json::object();
  if (sub->count("--input")) o["input"] = c.input;
  if (sub->count("--output")) o["output_dir"] = c.output;
  if (sub->count("--seed")) o["seed"] = c.seed;
  if (sub->count("--threads")) o["threads"] = c.threads;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acdkit: duration modelling toolkit"};
  app.require_subcommand(1);
  Common common;
  Json extra = Json::object();

  auto* ingest = app.add_subcommand("ingest", "validate a tick CSV and write a clean store");
  add_common(ingest, common);

  auto* simulate = app.add_subcommand("simulate", "simulate ticks from an ACD model");
  add_common(simulate, common);
  std::size_t n_days = 0, n_per_day = 0;
  simulate->add_option("--n-days", n_days, "trading days");
  simulate->add_option("--n-per-day", n_per_day, "durations per day");

  auto* durations = app.add_subcommand("durations", "build, thin, filter and describe durations");
  add_common(durations, common);
  std::string mode;
  int T = 0;
  double price_threshold = 0.0, volume_threshold = 0.0, cap = 0.0;
  durations->add_option("--mode", mode, "trade | aggregate | price | volume")
      ->check(CLI::IsMember({"trade", "aggregate", "price", "volume"}));
  durations->add_option("-T", T, "ticks per aggregated duration");
  durations->add_option("--price-threshold", price_threshold, "price change C");
  durations->add_option("--volume-threshold", volume_threshold, "cumulative volume V");
  durations->add_flag("--drop-zero", "remove zero durations");
  durations->add_option("--cap", cap, "drop durations above this many seconds");

  auto* deseason = app.add_subcommand("deseason", "estimate the intraday profile and adjust durations");
  add_common(deseason, common);
  std::string form;
  int bin_minutes = 0, fourier_order = 0;
  deseason->add_option("--form", form, "cubic_spline | fourier")->check(CLI::IsMember({"cubic_spline", "fourier"}));
  deseason->add_option("--bin-minutes", bin_minutes, "spline bin width");
  deseason->add_option("--fourier-order", fourier_order, "Fourier order");

  auto* fit = app.add_subcommand("fit", "fit an ACD model by maximum likelihood");
  add_common(fit, common);
  std::string family;
  std::vector<std::size_t> order;
  int n_starts = 0;
  fit->add_option("--family", family, "exponential | weibull | gamma | generalized_gamma");
  fit->add_option("--order", order, "m q")->expected(2);
  fit->add_option("--n-starts", n_starts, "optimizer starts");

  auto* diagnose = app.add_subcommand("diagnose", "residual diagnostics for a fitted model");
  add_common(diagnose, common);
  std::string fit_file;
  diagnose->add_option("--fit", fit_file, "fit.json written by 'fit'");

  auto* gof = app.add_subcommand("gof", "EDF goodness-of-fit tests with bootstrap critical values");
  add_common(gof, common);
  std::vector<std::string> families;
  std::size_t replicates = 0;
  double level = 0.0;
  std::string protocol;
  gof->add_option("--families", families, "null families");
  gof->add_option("--replicates", replicates, "bootstrap replicates");
  gof->add_option("--level", level, "significance level");
  gof->add_option("--protocol", protocol, "estimated | fixed")->check(CLI::IsMember({"estimated", "fixed"}));
  gof->add_flag("--within-day", "also run per-day tests");
  gof->add_flag("--unscaled", "report D and V without the sqrt(n) factor");

  auto* pipeline = app.add_subcommand("pipeline", "ticks to fitted and diagnosed ACD models");
  add_common(pipeline, common);
  std::vector<int> Ts;
  pipeline->add_option("-T", Ts, "aggregation levels");
  pipeline->add_option("--n-starts", n_starts, "optimizer starts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : acdkit::cli::kInputError;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  Json over = common_overrides(sub, common);
  if (name == "simulate") {
    if (sub->count("--n-days")) over["simulate"]["n_days"] = n_days;
    if (sub->count("--n-per-day")) over["simulate"]["n_per_day"] = n_per_day;
  } else if (name == "durations") {
    if (sub->count("--mode")) over["durations"]["mode"] = mode;
    if (sub->count("-T")) over["durations"]["T"] = T;
    if (sub->count("--price-threshold")) over["durations"]["price_threshold"] = price_threshold;
    if (sub->count("--volume-threshold")) over["durations"]["volume_threshold"] = volume_threshold;
    if (sub->count("--drop-zero")) over["durations"]["drop_zero"] = true;
    if (sub->count("--cap")) over["durations"]["cap"] = cap;
  } else if (name == "deseason") {
    if (sub->count("--form")) over["deseason"]["form"] = form;
    if (sub->count("--bin-minutes")) over["deseason"]["bin_minutes"] = bin_minutes;
    if (sub->count("--fourier-order")) over["deseason"]["fourier_order"] = fourier_order;
  } else if (name == "fit") {
    if (sub->count("--family")) over["fit"]["model"]["innovation"] = {{"family", family}, {"shapes", nullptr}};
    if (sub->count("--order")) {
      over["fit"]["model"]["alpha"] = std::vector<double>(order[0], 0.05);
      over["fit"]["model"]["alpha"][0] = 0.1;
      over["fit"]["model"]["beta"] = std::vector<double>(order[1], 0.05);
      over["fit"]["model"]["beta"][0] =
          0.8 - 0.05 * static_cast<double>(order[0] - 1) - 0.05 * static_cast<double>(order[1] - 1);
    }
    if (sub->count("--n-starts")) over["fit"]["n_starts"] = n_starts;
  } else if (name == "diagnose") {
    if (sub->count("--fit")) over["diagnose"]["fit"] = fit_file;
  } else if (name == "gof") {
    if (sub->count("--families")) over["gof"]["families"] = families;
    if (sub->count("--replicates")) over["gof"]["replicates"] = replicates;
    if (sub->count("--level")) over["gof"]["level"] = level;
    if (sub->count("--protocol")) over["gof"]["protocol"] = protocol;
    if (sub->count("--within-day")) over["gof"]["within_day"] = true;
    if (sub->count("--unscaled")) over["gof"]["sqrt_n_scaled"] = false;
  } else if (name == "pipeline") {
    if (sub->count("-T")) over["pipeline"]["T"] = Ts;
    if (sub->count("--n-starts")) over["pipeline"]["n_starts"] = n_starts;
  }

  return acdkit::cli::run_guarded(
      [&] {
        const Json file = common.config.empty() ? Json::object() : acdkit::cli::load_config_file(common.config);
        return acdkit::cli::dispatch(name, acdkit::cli::merge_config(file, over), std::cerr);
      },
      std::cerr);
}
