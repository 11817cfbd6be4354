#pragma once

// The five CLI verbs. Each run writes its CSVs and report.json into the
// output directory and returns the report.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "scenario.hpp"

namespace fastmono::cli {

inline constexpr const char* kToolName = "fastmono";
inline constexpr const char* kToolVersion = "1.0.0";

struct RunOptions {
  std::filesystem::path out = "out";
  int workers = 0;  // 0 keeps the OpenMP default
  std::optional<std::uint64_t> seed;
  bool bench = false;  // one untimed warm-up run before the reported one
  std::string scenario_path;
};

struct RunOutcome {
  nlohmann::json report;
  int exit_code = 0;  // 3 when the run finished but a numerical contract failed
};

RunOutcome run_direct(ScenarioFile s, const RunOptions& opt);
RunOutcome run_fit(ScenarioFile s, const RunOptions& opt);
RunOutcome run_fmm(ScenarioFile s, const RunOptions& opt);
RunOutcome run_compare(ScenarioFile s, const RunOptions& opt);
RunOutcome run_validate(ScenarioFile s, const RunOptions& opt);

/// Loads the scenario and dispatches on the verb name.
RunOutcome run_verb(const std::string& verb, const std::filesystem::path& scenario,
                    RunOptions opt);

/// 2 for configuration, geometry and domain errors, 3 for numerical failures.
int exit_code_for(const Error& e);

/// {"error": {"kind", "exit_code", "message", ...}}.
nlohmann::json error_json(const std::exception& e);

}  // namespace fastmono::cli
