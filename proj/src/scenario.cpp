#include "scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string_view>

namespace fastmono::cli {

using nlohmann::json;

namespace {

void allow_keys(const json& j, std::initializer_list<std::string_view> keys,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

double number(const json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(where + "." + key + " must be finite");
  return d;
}

std::int64_t integer(const json& j, const char* key, std::int64_t fallback,
                     const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key + " must be an integer");
  return v.get<std::int64_t>();
}

std::size_t count(const json& j, const char* key, std::size_t fallback, const std::string& where) {
  const auto v = integer(j, key, static_cast<std::int64_t>(fallback), where);
  if (v < 0) throw ConfigError(where + "." + key + " must be >= 0");
  return static_cast<std::size_t>(v);
}

bool boolean(const json& j, const char* key, bool fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw ConfigError(where + "." + key + " must be true or false");
  return j.at(key).get<bool>();
}

std::string text(const json& j, const char* key, const std::string& fallback,
                 const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw ConfigError(where + "." + key + " must be a string");
  return j.at(key).get<std::string>();
}

Point point(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(where + " must be a pair of numbers [x1, x2]");
  const Point p{v[0].get<double>(), v[1].get<double>()};
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ConfigError(where + " must be finite");
  return p;
}

Complex complex_value(const json& v, const std::string& where) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  const Point p = point(v, where);
  return {p.x, p.y};
}

json pair(Point p) { return json::array({p.x, p.y}); }

CurveSpec parse_curve(const json& j, const std::string& where) {
  allow_keys(j, {"mean_radius", "lobe_amplitude", "lobes", "center", "rotation"}, where);
  if (!j.contains("mean_radius")) throw ConfigError(where + ".mean_radius is required");
  CurveSpec c;
  c.mean_radius = number(j, "mean_radius", 1.0, where);
  c.lobe_amplitude = number(j, "lobe_amplitude", 0.0, where);
  c.lobes = static_cast<int>(integer(j, "lobes", 3, where));
  if (j.contains("center")) c.center = point(j.at("center"), where + ".center");
  c.rotation = number(j, "rotation", 0.0, where);
  if (!(c.mean_radius > 0.0)) throw ConfigError(where + ".mean_radius must be > 0");
  if (c.lobe_amplitude < 0.0 || c.lobe_amplitude >= c.mean_radius)
    throw ConfigError(where + ".lobe_amplitude must lie in [0, mean_radius)");
  if (c.lobes < 1) throw ConfigError(where + ".lobes must be >= 1");
  return c;
}

FitConfig parse_fit(const json& j, FitConfig f, const std::string& where) {
  allow_keys(j,
             {"selection", "kernel", "P", "M", "tail_threshold", "residual_cap", "check_tolerance",
              "m_per_p", "selection_m_per_p", "p_min", "p_max"},
             where);
  const std::string rule = text(j, "selection", to_string(f.selection), where);
  if (rule == "spectrum") f.selection = SelectionRule::Spectrum;
  else if (rule == "observation") f.selection = SelectionRule::Observation;
  else throw ConfigError(where + ".selection must be \"spectrum\" or \"observation\"");
  const std::string kernel = text(j, "kernel", to_string(f.kernel), where);
  if (kernel == "quadrature") f.kernel = LayerKernel::Quadrature;
  else if (kernel == "point") f.kernel = LayerKernel::Point;
  else throw ConfigError(where + ".kernel must be \"quadrature\" or \"point\"");
  if (j.contains("P")) {
    const auto& p = j.at("P");
    if (p.is_string() && p.get<std::string>() == "auto") f.P = 0;
    else if (p.is_number_integer() && p.get<std::int64_t>() >= 1) f.P = p.get<std::size_t>();
    else throw ConfigError(where + ".P must be a positive integer or \"auto\"");
  }
  f.M = count(j, "M", f.M, where);
  f.tail_threshold = number(j, "tail_threshold", f.tail_threshold, where);
  f.residual_cap = number(j, "residual_cap", f.residual_cap, where);
  f.check_tolerance = number(j, "check_tolerance", f.check_tolerance, where);
  f.m_per_p = count(j, "m_per_p", f.m_per_p, where);
  f.selection_m_per_p = count(j, "selection_m_per_p", f.selection_m_per_p, where);
  f.p_min = count(j, "p_min", f.p_min, where);
  f.p_max = count(j, "p_max", f.p_max, where);
  if (!(f.tail_threshold > 0.0) || !(f.residual_cap > 0.0) || !(f.check_tolerance > 0.0))
    throw ConfigError(where + ": thresholds must be > 0");
  if (f.m_per_p < 2 || f.selection_m_per_p < 2) throw ConfigError(where + ": m_per_p must be >= 2");
  if (f.p_min < 1 || f.p_min > f.p_max) throw ConfigError(where + ": need 1 <= p_min <= p_max");
  if (f.P > 0 && f.M > 0 && f.M <= f.P) throw ConfigError(where + ": M must exceed P");
  return f;
}

RodSpec parse_rods(const json& j, const std::string& where) {
  allow_keys(j, {"pitch", "hole_fraction", "positions", "radius", "permittivity"}, where);
  RodSpec r;
  const bool lattice = j.contains("pitch");
  const bool listed = j.contains("positions");
  if (lattice == listed) throw ConfigError(where + " needs exactly one of pitch or positions");
  if (lattice) {
    r.pitch = number(j, "pitch", 0.0, where);
    r.hole_fraction = number(j, "hole_fraction", 0.0, where);
  } else {
    if (j.contains("hole_fraction")) throw ConfigError(where + ".hole_fraction needs a lattice");
    const auto& list = j.at("positions");
    if (!list.is_array()) throw ConfigError(where + ".positions must be a list of [x1, x2]");
    for (std::size_t i = 0; i < list.size(); ++i)
      r.positions.push_back(point(list[i], where + ".positions[" + std::to_string(i) + "]"));
  }
  r.radius = number(j, "radius", r.radius, where);
  r.permittivity = number(j, "permittivity", r.permittivity, where);
  if (!(r.radius > 0.0)) throw ConfigError(where + ".radius must be > 0");
  if (!(r.permittivity >= 1.0)) throw ConfigError(where + ".permittivity must be >= 1");
  if (r.pitch && !(*r.pitch > 2.0 * r.radius))
    throw ConfigError(where + ".pitch must exceed the rod diameter");
  if (!(r.hole_fraction >= 0.0 && r.hole_fraction < 1.0))
    throw ConfigError(where + ".hole_fraction must lie in [0, 1)");
  return r;
}

ClusterSpec parse_cluster(const json& j, const FitConfig& base, const std::string& where) {
  allow_keys(j, {"curve", "rods", "enclosure", "fit"}, where);
  ClusterSpec c;
  if (j.contains("curve")) c.curve = parse_curve(j.at("curve"), where + ".curve");
  if (!j.contains("rods")) throw ConfigError(where + ".rods is required");
  c.rods = parse_rods(j.at("rods"), where + ".rods");
  if (j.contains("enclosure")) {
    const auto& e = j.at("enclosure");
    allow_keys(e, {"scale", "curve"}, where + ".enclosure");
    if (e.contains("scale") && e.contains("curve"))
      throw ConfigError(where + ".enclosure takes either scale or curve");
    c.enclosure.scale = number(e, "scale", c.enclosure.scale, where + ".enclosure");
    if (e.contains("curve")) c.enclosure.curve = parse_curve(e.at("curve"), where + ".enclosure.curve");
  }
  if (!(c.enclosure.scale > 0.0)) throw ConfigError(where + ".enclosure.scale must be > 0");
  if (c.rods.pitch && !c.curve) throw ConfigError(where + ": a lattice fill needs a curve");
  if (!c.curve && !c.enclosure.curve) throw ConfigError(where + " needs a curve or an enclosure curve");
  if (j.contains("fit")) {
    parse_fit(j.at("fit"), base, where + ".fit");
    c.fit = j.at("fit");
  }
  return c;
}

}  // namespace

ScenarioFile parse_scenario(const json& doc) {
  const std::string top = "scenario";
  allow_keys(doc,
             {"name", "wavelength", "incident", "seed", "clusters", "solver", "coupling", "fit",
              "observation", "grid", "homothety"},
             top);
  ScenarioFile s;
  s.name = text(doc, "name", "", top);
  if (!doc.contains("wavelength")) throw ConfigError("scenario.wavelength is required");
  s.wavelength = number(doc, "wavelength", 1.0, top);
  if (!(s.wavelength > 0.0)) throw ConfigError("scenario.wavelength must be > 0");
  const auto seed = integer(doc, "seed", 0, top);
  if (seed < 0) throw ConfigError("scenario.seed must be >= 0");
  s.seed = static_cast<std::uint64_t>(seed);
  s.homothety = number(doc, "homothety", s.homothety, top);
  if (!(s.homothety > 1.0)) throw ConfigError("scenario.homothety must be > 1");

  if (doc.contains("incident")) {
    const auto& inc = doc.at("incident");
    allow_keys(inc, {"direction", "amplitude"}, "incident");
    Point d = s.incident.direction;
    Complex a = s.incident.amplitude;
    if (inc.contains("direction")) d = point(inc.at("direction"), "incident.direction");
    if (inc.contains("amplitude")) a = complex_value(inc.at("amplitude"), "incident.amplitude");
    s.incident = make_plane_wave(d, a);
  }

  if (doc.contains("solver")) {
    const auto& j = doc.at("solver");
    const std::string w = "solver";
    allow_keys(j, {"mode", "rtol", "direct_max", "restart", "max_iterations"}, w);
    const std::string mode = text(j, "mode", "auto", w);
    if (mode == "auto") s.solver.mode = SolverConfig::Mode::Auto;
    else if (mode == "dense") s.solver.mode = SolverConfig::Mode::Dense;
    else if (mode == "iterative") s.solver.mode = SolverConfig::Mode::Iterative;
    else throw ConfigError("solver.mode must be auto, dense or iterative");
    s.solver.rtol = number(j, "rtol", s.solver.rtol, w);
    s.solver.direct_max = count(j, "direct_max", s.solver.direct_max, w);
    s.solver.restart = static_cast<int>(integer(j, "restart", s.solver.restart, w));
    s.solver.max_iterations = static_cast<int>(integer(j, "max_iterations", s.solver.max_iterations, w));
    if (!(s.solver.rtol > 0.0) || s.solver.restart < 1 || s.solver.max_iterations < 1)
      throw ConfigError("solver: rtol, restart and max_iterations must be positive");
  }

  if (doc.contains("coupling")) {
    const auto& j = doc.at("coupling");
    const std::string w = "coupling";
    allow_keys(j, {"scheme", "tolerance", "max_iterations", "divergence_window"}, w);
    const std::string scheme = text(j, "scheme", "gauss_seidel", w);
    if (scheme == "gauss_seidel") s.coupling.scheme = CouplingConfig::Scheme::GaussSeidel;
    else if (scheme == "jacobi") s.coupling.scheme = CouplingConfig::Scheme::Jacobi;
    else throw ConfigError("coupling.scheme must be gauss_seidel or jacobi");
    s.coupling.tolerance = number(j, "tolerance", s.coupling.tolerance, w);
    s.coupling.max_iterations = static_cast<int>(integer(j, "max_iterations", s.coupling.max_iterations, w));
    s.coupling.divergence_window =
        static_cast<int>(integer(j, "divergence_window", s.coupling.divergence_window, w));
    if (!(s.coupling.tolerance > 0.0) || s.coupling.max_iterations < 1 ||
        s.coupling.divergence_window < 1)
      throw ConfigError("coupling: tolerance, max_iterations and divergence_window must be positive");
  }

  if (doc.contains("fit")) s.fit = parse_fit(doc.at("fit"), FitConfig{}, "fit");

  if (doc.contains("observation")) {
    const auto& j = doc.at("observation");
    allow_keys(j, {"radius", "points", "center"}, "observation");
    s.observation.radius = number(j, "radius", s.observation.radius, "observation");
    s.observation.points = count(j, "points", s.observation.points, "observation");
    if (j.contains("center")) s.observation.center = point(j.at("center"), "observation.center");
    if (!(s.observation.radius > 0.0) || s.observation.points < 1)
      throw ConfigError("observation: radius and points must be positive");
  }

  if (doc.contains("grid")) {
    const auto& j = doc.at("grid");
    const std::string w = "grid";
    allow_keys(j, {"enabled", "points_per_wavelength", "spacing", "half_width", "center"}, w);
    if (j.contains("points_per_wavelength") && j.contains("spacing"))
      throw ConfigError("grid takes either points_per_wavelength or spacing");
    s.grid.enabled = boolean(j, "enabled", s.grid.enabled, w);
    s.grid.points_per_wavelength = number(j, "points_per_wavelength", s.grid.points_per_wavelength, w);
    s.grid.spacing = number(j, "spacing", s.grid.spacing, w);
    s.grid.half_width = number(j, "half_width", s.grid.half_width, w);
    if (j.contains("center")) s.grid.center = point(j.at("center"), "grid.center");
    if (!(s.grid.points_per_wavelength > 0.0) || s.grid.spacing < 0.0 || s.grid.half_width < 0.0)
      throw ConfigError("grid: sizes must be positive");
  }

  if (doc.contains("clusters")) {
    const auto& list = doc.at("clusters");
    if (!list.is_array()) throw ConfigError("scenario.clusters must be a list");
    for (std::size_t i = 0; i < list.size(); ++i)
      s.clusters.push_back(parse_cluster(list[i], s.fit, "clusters[" + std::to_string(i) + "]"));
  }
  return s;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("scenario file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_scenario(doc);
}

json to_json(const CurveSpec& c) {
  return {{"mean_radius", c.mean_radius},
          {"lobe_amplitude", c.lobe_amplitude},
          {"lobes", c.lobes},
          {"center", pair(c.center)},
          {"rotation", c.rotation}};
}

json to_json(const FitConfig& f) {
  json j = {{"selection", to_string(f.selection)},
            {"kernel", to_string(f.kernel)},
            {"M", f.M},
            {"tail_threshold", f.tail_threshold},
            {"residual_cap", f.residual_cap},
            {"check_tolerance", f.check_tolerance},
            {"m_per_p", f.m_per_p},
            {"selection_m_per_p", f.selection_m_per_p},
            {"p_min", f.p_min},
            {"p_max", f.p_max}};
  if (f.P == 0) j["P"] = "auto";
  else j["P"] = f.P;
  return j;
}

FitConfig cluster_fit(const ScenarioFile& s, std::size_t j) {
  return parse_fit(s.clusters.at(j).fit, s.fit, "clusters[" + std::to_string(j) + "].fit");
}

/// Cluster fit settings are written fully resolved, so scenarios that differ
/// only in where a setting is spelled out serialize identically.
json to_json(const ScenarioFile& s) {
  json j;
  j["name"] = s.name;
  j["wavelength"] = s.wavelength;
  j["seed"] = s.seed;
  j["homothety"] = s.homothety;
  j["incident"] = {{"direction", pair(s.incident.direction)},
                   {"amplitude", json::array({s.incident.amplitude.real(), s.incident.amplitude.imag()})}};
  const char* mode = s.solver.mode == SolverConfig::Mode::Auto    ? "auto"
                     : s.solver.mode == SolverConfig::Mode::Dense ? "dense"
                                                                  : "iterative";
  j["solver"] = {{"mode", mode},
                 {"rtol", s.solver.rtol},
                 {"direct_max", s.solver.direct_max},
                 {"restart", s.solver.restart},
                 {"max_iterations", s.solver.max_iterations}};
  j["coupling"] = {
      {"scheme", s.coupling.scheme == CouplingConfig::Scheme::GaussSeidel ? "gauss_seidel" : "jacobi"},
      {"tolerance", s.coupling.tolerance},
      {"max_iterations", s.coupling.max_iterations},
      {"divergence_window", s.coupling.divergence_window}};
  j["fit"] = to_json(s.fit);
  j["observation"] = {{"radius", s.observation.radius},
                      {"points", s.observation.points},
                      {"center", pair(s.observation.center)}};
  j["grid"] = {{"enabled", s.grid.enabled},
               {"half_width", s.grid.half_width},
               {"center", pair(s.grid.center)}};
  if (s.grid.spacing > 0.0) j["grid"]["spacing"] = s.grid.spacing;
  else j["grid"]["points_per_wavelength"] = s.grid.points_per_wavelength;

  j["clusters"] = json::array();
  for (std::size_t i = 0; i < s.clusters.size(); ++i) {
    const auto& c = s.clusters[i];
    json cj;
    if (c.curve) cj["curve"] = to_json(*c.curve);
    json rods = {{"radius", c.rods.radius}, {"permittivity", c.rods.permittivity}};
    if (c.rods.pitch) {
      rods["pitch"] = *c.rods.pitch;
      rods["hole_fraction"] = c.rods.hole_fraction;
    } else {
      rods["positions"] = json::array();
      for (const auto& p : c.rods.positions) rods["positions"].push_back(pair(p));
    }
    cj["rods"] = rods;
    if (c.enclosure.curve) cj["enclosure"] = {{"curve", to_json(*c.enclosure.curve)}};
    else cj["enclosure"] = {{"scale", c.enclosure.scale}};
    cj["fit"] = to_json(cluster_fit(s, i));
    j["clusters"].push_back(cj);
  }
  return j;
}

std::string scenario_hash(const ScenarioFile& s) {
  json j = to_json(s);
  j.erase("name");
  const std::string text = j.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

BoundaryCurve make_curve(const CurveSpec& c, std::size_t M) {
  return make_trefoil(c.mean_radius, c.lobe_amplitude, c.lobes, c.center, c.rotation, M);
}

std::vector<Point> circle_points(Point center, double radius, std::size_t n) {
  std::vector<Point> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
    pts[i] = center + Point{radius * std::cos(a), radius * std::sin(a)};
  }
  return pts;
}

BuiltScenario build_scenario(const ScenarioFile& s) {
  if (s.clusters.empty()) throw ConfigError("degenerate scenario: no clusters");
  BuiltScenario b;
  auto& p = b.problem;
  p.k = WaveNumber::from_wavelength(s.wavelength);
  p.incident = s.incident;
  p.solver = s.solver;
  p.coupling = s.coupling;
  p.fit = s.fit;
  for (std::size_t j = 0; j < s.clusters.size(); ++j) {
    const auto& spec = s.clusters[j];
    Cluster c;
    std::optional<BoundaryCurve> curve;
    if (spec.curve) curve = make_curve(*spec.curve, kEnclosureSamples);
    if (spec.rods.pitch) {
      c.scatterers = fill_with_rods(*curve, *spec.rods.pitch, spec.rods.radius,
                                    spec.rods.permittivity, spec.rods.hole_fraction, s.seed + j);
    } else {
      for (const auto& x : spec.rods.positions)
        c.scatterers.push_back({x, spec.rods.radius, spec.rods.permittivity});
    }
    c.enclosure = spec.enclosure.curve ? make_curve(*spec.enclosure.curve, kEnclosureSamples)
                                       : homothety(*curve, spec.enclosure.scale);
    p.clusters.push_back(std::move(c));
    p.cluster_fit.push_back(cluster_fit(s, j));
  }
  b.observation = circle_points(s.observation.center, s.observation.radius, s.observation.points);
  for (std::size_t i = 0; i < s.observation.points; ++i)
    b.angles.push_back(2.0 * kPi * static_cast<double>(i) / static_cast<double>(s.observation.points));
  p.check_points = b.observation;
  validate_scenario(p);
  return b;
}

}  // namespace fastmono::cli
