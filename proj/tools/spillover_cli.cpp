// Command-line front end for the batch pipeline.

#include <CLI11.hpp>

#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "spillover/config.hpp"
#include "spillover/pipeline.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<double> alpha;
  std::optional<std::string> crisis_start;
  std::optional<std::string> crisis_end;
  std::optional<double> quantile;
  bool reverse = false;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
};

spillover::RunConfig resolve(const Overrides& o) {
  using namespace spillover;
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.alpha) c.alpha = *o.alpha;
  if (o.crisis_start) c.crisis_start = parse_date(*o.crisis_start);
  if (o.crisis_end) c.crisis_end = parse_date(*o.crisis_end);
  if (o.quantile) c.quantile = *o.quantile;
  if (o.reverse) c.reverse = true;
  if (o.workers) c.workers = *o.workers;
  if (o.seed) c.seed = *o.seed;
  validate(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace spillover;
  CLI::App app{"Financial spillover pipeline: volatility spillovers, tail coexceedances, industry panels, "
               "count regressions and distance to default."};
  app.require_subcommand(1);

  Overrides o;
  const std::map<std::string, std::function<Report(const RunConfig&)>> commands{
      {"spillover", cmd_spillover}, {"ccx", cmd_ccx}, {"characteristics", cmd_characteristics},
      {"regress", cmd_regress},     {"dd", cmd_dd},   {"simulate", cmd_simulate}};
  const std::map<std::string, std::string> help{
      {"spillover", "VAR-GARCH volatility spillover per industry"},
      {"ccx", "coexceedance likelihoods, crisis tests and quarterly counts"},
      {"characteristics", "industry-quarter characteristics panel"},
      {"regress", "Poisson GMM count regressions"},
      {"dd", "Merton distance to default and its panel regression"},
      {"simulate", "synthetic input files with ground truth"}};

  for (const auto& [name, fn] : commands) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--alpha", o.alpha, "exceedance probability (0.05, 0.025 or 0.01)");
    sub->add_option("--crisis-start", o.crisis_start, "first crisis date, YYYY-MM-DD");
    sub->add_option("--crisis-end", o.crisis_end, "last crisis date, YYYY-MM-DD");
    sub->add_option("--quantile", o.quantile, "competition quantile (0.25 or 0.10)");
    sub->add_flag("--reverse", o.reverse, "let industry shocks drive the financial sector");
    sub->add_option("--workers", o.workers, "parallel workers");
    sub->add_option("--seed", o.seed, "simulation seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  const auto* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  RunConfig config;
  try {
    config = resolve(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  Report report = commands.at(name)(config);
  const int code = finish(report, config);
  const auto manifest = report.to_json();
  std::cout << name << ": " << manifest["status"].get<std::string>() << ", " << report.outputs().size()
            << " outputs, " << report.error_count() << " row errors\n";
  if (manifest.contains("fatal")) std::cerr << "error: " << manifest["fatal"].get<std::string>() << "\n";
  return code;
}
