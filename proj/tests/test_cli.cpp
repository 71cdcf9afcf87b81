#include <catch_amalgamated.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "spillover/config.hpp"
#include "spillover/parallel.hpp"
#include "spillover/pipeline.hpp"

using namespace spillover;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("spillover_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig small_config(const fs::path& dir) {
  RunConfig c;
  c.returns = (dir / "data/returns.csv").string();
  c.accounting = (dir / "data/accounting.csv").string();
  c.hhi = (dir / "data/hhi.csv").string();
  c.firm_returns = (dir / "data/firm_returns.csv").string();
  c.output = (dir / "out").string();
  c.sim_industries = 6;
  c.sim_firms = 4;
  c.sim_return_firms = 2;
  c.models = {"table7"};
  c.exclude = {"I05"};
  c.seed = 3;
  return c;
}

using Command = Report (*)(const RunConfig&);

std::map<std::string, std::string> run_all(RunConfig c, int workers) {
  c.workers = workers;
  for (Command cmd : {cmd_simulate, cmd_spillover, cmd_ccx, cmd_characteristics, cmd_regress, cmd_dd}) {
    auto report = cmd(c);
    INFO(report.to_json().dump());
    REQUIRE_FALSE(report.failed());
    finish(report, c);
  }
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(c.output)) {
    if (e.path().filename() != "config.txt") files[e.path().filename().string()] = slurp(e.path());
  }
  for (const auto& e : fs::directory_iterator(fs::path(c.returns).parent_path()))
    files["data/" + e.path().filename().string()] = slurp(e.path());
  return files;
}

}  // namespace

TEST_CASE("config files parse, validate and round-trip", "[cli]") {
  const auto c = parse_config("# baseline\nalpha = 0.025  # robustness\nquantile=0.10\nexclude = I01, I02\n"
                              "crisis_start = 2007-08-01\ncrisis_end = 2009-06-30\nmodels = table8\nseed = 42\n");
  REQUIRE(c.alpha == 0.025);
  REQUIRE(c.quantile == 0.10);
  REQUIRE(c.exclude == std::set<std::string>{"I01", "I02"});
  REQUIRE(c.crisis().start == make_date(2007, 8, 1));
  REQUIRE(c.seed == 42);
  REQUIRE_NOTHROW(validate(c));
  const auto again = parse_config(to_text(c));
  REQUIRE(to_text(again) == to_text(c));

  REQUIRE_THROWS_AS(parse_config("colour = red\n"), DataError);
  REQUIRE_THROWS_AS(parse_config("alpha\n"), DataError);
  REQUIRE_THROWS_AS(validate(parse_config("alpha = 0.1\n")), DataError);
  REQUIRE_THROWS_AS(validate(parse_config("quantile = 0.3\n")), DataError);
  REQUIRE_THROWS_AS(validate(parse_config("crisis_start = 2010-01-01\n")), DataError);
  REQUIRE_THROWS_AS(validate(parse_config("models = table11\n")), DataError);
}

TEST_CASE("parallel map keeps index order and rethrows the first failure", "[cli]") {
  const auto out = parallel_map(100, 4, [](std::size_t i) { return static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) REQUIRE(out[i] == static_cast<int>(i * i));
  REQUIRE_THROWS_WITH(parallel_map(10, 3,
                                   [](std::size_t i) -> int {
                                     if (i == 7 || i == 4) throw DataError("task " + std::to_string(i));
                                     return 0;
                                   }),
                      "task 4");
}

TEST_CASE("an empty industry list gives a header-only table", "[cli]") {
  const auto dir = scratch("empty");
  RunConfig c;
  c.returns = (dir / "returns.csv").string();
  c.output = (dir / "out").string();
  const auto cal = TradingCalendar::weekdays(make_date(2001, 1, 1), make_date(2001, 3, 31));
  write_returns_csv(ReturnsPanel(cal, {"FIN"}, {std::vector<double>(cal.size(), 0.01)}, "FIN"), c.returns);
  auto report = cmd_spillover(c);
  REQUIRE(finish(report, c) == 0);
  const auto text = slurp(dir / "out/table4.csv");
  REQUIRE(std::count(text.begin(), text.end(), '\n') == 1);
  REQUIRE(fs::exists(dir / "out/errors_spillover.json"));
}

TEST_CASE("missing inputs fail with a manifest", "[cli]") {
  const auto dir = scratch("missing");
  RunConfig c;
  c.returns = (dir / "nope.csv").string();
  c.output = (dir / "out").string();
  auto report = cmd_ccx(c);
  REQUIRE(finish(report, c) == 2);
  const auto manifest = json::parse(slurp(dir / "out/errors_ccx.json"));
  REQUIRE(manifest["status"] == "failed");
  REQUIRE(manifest["fatal"].get<std::string>().find("nope.csv") != std::string::npos);
}

TEST_CASE("simulated pipeline is byte-identical across runs and worker counts", "[cli][synth]") {
  const auto dir = scratch("determinism");
  const auto c = small_config(dir);
  const auto first = run_all(c, 1);
  const auto second = run_all(c, 3);
  REQUIRE(first.size() == second.size());
  for (const auto& [name, text] : first) {
    INFO(name);
    REQUIRE(second.at(name) == text);
  }
  for (const auto* name : {"table4.csv", "table5.csv", "table6.csv", "table7.csv", "table10.csv", "industry_panel.csv"})
    REQUIRE(first.count(name));

  // Excluded industries never reach the outputs.
  REQUIRE(first.at("industry_panel.csv").find("I05") == std::string::npos);
  REQUIRE(first.at("table4.csv").find("I05") == std::string::npos);
  // One row per non-financial, non-excluded sector.
  const auto& t4 = first.at("table4.csv");
  REQUIRE(std::count(t4.begin(), t4.end(), '\n') == 1 + 5);

  // The truth sidecar describes the simulated panel.
  const auto truth = json::parse(first.at("truth.json"));
  REQUIRE(truth["returns"]["industries"].size() == 6);
  REQUIRE(truth["returns"]["crisis_start"] == "2007-07-01");
}

TEST_CASE("reverse mode writes its own table", "[cli]") {
  const auto dir = scratch("reverse");
  auto c = small_config(dir);
  c.sim_industries = 2;
  auto sim = cmd_simulate(c);
  REQUIRE(finish(sim, c) == 0);
  c.reverse = true;
  auto report = cmd_spillover(c);
  REQUIRE(finish(report, c) == 0);
  REQUIRE(fs::exists(dir / "out/table4_reverse.csv"));
  REQUIRE_FALSE(fs::exists(dir / "out/table4.csv"));
}
