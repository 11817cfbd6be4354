#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "io.hpp"
#include "runner.hpp"

namespace {

using nlohmann::json;
using namespace fastmono::cli;

int report_failure(const json& error, const std::string& verb, const RunOptions& opt) {
  std::cerr << error.dump() << std::endl;
  try {
    if (!opt.out.empty()) {
      std::filesystem::create_directories(opt.out);
      json report = {{"tool", {{"name", kToolName}, {"version", kToolVersion}}},
                     {"mode", verb},
                     {"status", "error"},
                     {"scenario", {{"path", opt.scenario_path}}},
                     {"error", error.at("error")}};
      write_json(opt.out / "report.json", report);
    }
  } catch (const std::exception&) {
    // the JSON on stderr already carries the failure
  }
  return error.at("error").at("exit_code").get<int>();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustered 2D multiple scattering with monopole layers"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  RunOptions opt;
  std::string scenario;
  std::string out = "out";
  long long seed = -1;
  const char* verbs[][2] = {
      {"direct", "solve all rods as one system"},
      {"fit", "direct solve, then fit one monopole layer per cluster"},
      {"fmm", "coupled cluster solve through monopole layers"},
      {"compare", "run direct and fmm and compare them on the observation circle"},
      {"validate", "check a scenario file without solving"},
  };
  for (const auto& [name, help] : verbs) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--scenario", scenario, "scenario JSON file")->required();
    sub->add_option("--out", out, "output directory")->capture_default_str();
    sub->add_option("--workers", opt.workers, "worker threads (0 = default)")->capture_default_str();
    sub->add_option("--seed", seed, "overrides the scenario seed");
    sub->add_flag("--bench", opt.bench, "untimed warm-up run before the reported one");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const json err = {{"error", {{"kind", "config"}, {"exit_code", 2}, {"message", e.what()}}}};
    std::cerr << err.dump() << std::endl;
    return 2;
  }

  const std::string verb = app.get_subcommands().front()->get_name();
  opt.out = out;
  opt.scenario_path = scenario;
  try {
    if (seed >= 0) opt.seed = static_cast<std::uint64_t>(seed);
    else if (app.get_subcommands().front()->count("--seed") > 0)
      throw fastmono::ConfigError("--seed must be >= 0");
    const RunOutcome outcome = run_verb(verb, scenario, opt);
    if (outcome.exit_code != 0) {
      std::cerr << json{{"error", outcome.report.at("error")}}.dump() << std::endl;
      return outcome.exit_code;
    }
    std::cout << json{{"status", "ok"},
                      {"mode", verb},
                      {"report", (opt.out / "report.json").string()}}
                     .dump()
              << std::endl;
    return 0;
  } catch (const std::exception& e) {
    return report_failure(error_json(e), verb, opt);
  }
}
