#pragma once

// Scenario files: one JSON document describing the incident wave, the
// clusters (curve, rod fill, enclosure, layer settings), solver tolerances and
// the requested outputs. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fastmono/fast_monopole.hpp"

namespace fastmono::cli {

struct CurveSpec {
  double mean_radius = 1.0;
  double lobe_amplitude = 0.0;
  int lobes = 3;
  Point center;
  double rotation = 0.0;
};

struct RodSpec {
  std::optional<double> pitch;    // square-lattice fill of the cluster curve
  double hole_fraction = 0.0;
  std::vector<Point> positions;   // explicit rods instead of a lattice
  double radius = 0.02;
  double permittivity = 12.0;
};

struct EnclosureSpec {
  double scale = 1.1;              // homothety of the cluster curve
  std::optional<CurveSpec> curve;  // explicit enclosure instead
};

struct ClusterSpec {
  std::optional<CurveSpec> curve;
  RodSpec rods;
  EnclosureSpec enclosure;
  nlohmann::json fit = nlohmann::json::object();  // overrides of the scenario-wide fit
};

struct ObservationSpec {
  double radius = 8.0;
  std::size_t points = 360;
  Point center;
};

struct GridSpec {
  bool enabled = true;
  double points_per_wavelength = 4.0;
  double spacing = 0.0;     // overrides points_per_wavelength when > 0
  double half_width = 0.0;  // 0 uses the observation radius
  Point center;
};

struct ScenarioFile {
  std::string name;
  double wavelength = 1.0;
  IncidentField incident;
  std::uint64_t seed = 0;
  std::vector<ClusterSpec> clusters;
  SolverConfig solver;
  CouplingConfig coupling;
  FitConfig fit;
  ObservationSpec observation;
  GridSpec grid;
  double homothety = 1.3;
};

/// Number of samples kept on each enclosure outside the layer fit.
inline constexpr std::size_t kEnclosureSamples = 256;

ScenarioFile parse_scenario(const nlohmann::json& doc);
ScenarioFile load_scenario(const std::filesystem::path& path);

/// Fully defaulted form; parse_scenario(to_json(s)) reproduces s.
nlohmann::json to_json(const ScenarioFile& s);
nlohmann::json to_json(const CurveSpec& c);
nlohmann::json to_json(const FitConfig& f);

/// FNV-1a (64 bit) over the canonical JSON of the scenario without its name.
std::string scenario_hash(const ScenarioFile& s);

FitConfig cluster_fit(const ScenarioFile& s, std::size_t j);
BoundaryCurve make_curve(const CurveSpec& c, std::size_t M);

struct BuiltScenario {
  MultiClusterScenario problem;
  std::vector<Point> observation;  // observation circle, counter-clockwise from angle 0
  std::vector<double> angles;
};

/// Builds rods and enclosures and checks every scenario invariant.
BuiltScenario build_scenario(const ScenarioFile& s);

std::vector<Point> circle_points(Point center, double radius, std::size_t n);

}  // namespace fastmono::cli
