#include "runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "io.hpp"

namespace fastmono::cli {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

constexpr std::size_t kTracePoints = 360;
constexpr std::size_t kMaxGridSide = 4001;

int worker_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

BuiltScenario prepare(ScenarioFile& s, const RunOptions& opt) {
  if (opt.workers < 0) throw ConfigError("--workers must be >= 0");
#ifdef _OPENMP
  if (opt.workers > 0) omp_set_num_threads(opt.workers);
#endif
  if (opt.seed) s.seed = *opt.seed;
  BuiltScenario b = build_scenario(s);
  std::filesystem::create_directories(opt.out);
  return b;
}

json base_report(const ScenarioFile& s, const BuiltScenario& b, const RunOptions& opt,
                 const char* mode) {
  json r;
  r["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  r["mode"] = mode;
  r["status"] = "ok";
  r["scenario"] = {{"name", s.name}, {"path", opt.scenario_path}, {"hash", scenario_hash(s)}};
  r["seed"] = s.seed;
  r["wavelength"] = s.wavelength;
  r["k"] = b.problem.k.value();
  r["rods"] = b.problem.total_rods();
  r["cluster_rods"] = json::array();
  for (const auto& c : b.problem.clusters) r["cluster_rods"].push_back(c.scatterers.size());
  r["workers"] = worker_count();
  r["bench"] = opt.bench;
  r["outputs"] = json::array();
  r["warnings"] = json::array();
  return r;
}

void emit(json& report, const RunOptions& opt, const std::string& name, const Table& t) {
  write_csv(opt.out / name, t);
  report["outputs"].push_back(name);
}

RunOutcome finish(json report, const RunOptions& opt, int code = 0) {
  report["outputs"].push_back("report.json");
  write_json(opt.out / "report.json", report);
  return {std::move(report), code};
}

template <class F>
auto measured(bool bench, F&& f) {
  if (bench) (void)f();
  return f();
}

json error_metrics(const ComplexVector& approx, const ComplexVector& reference) {
  return {{"max_relative", relative_max_error(approx, reference)},
          {"mean_relative", relative_mean_error(approx, reference)},
          {"l2_relative", relative_l2_error(approx, reference)}};
}

// ---- direct solve of all rods --------------------------------------------

struct DirectResult {
  ClusterSolution solution;
  std::vector<std::size_t> offsets;  // first rod of each cluster, plus the total
  double assembly = 0.0;
  double solve = 0.0;
};

DirectResult solve_all(const MultiClusterScenario& p) {
  DirectResult d;
  std::vector<Scatterer> all;
  for (const auto& c : p.clusters) {
    d.offsets.push_back(all.size());
    all.insert(all.end(), c.scatterers.begin(), c.scatterers.end());
  }
  d.offsets.push_back(all.size());
  const FoldyLaxOperator op(all, p.k, p.solver);
  const auto t = Clock::now();
  const ComplexVector u = incident_values(all, p.incident, p.k);
  d.solution = op.solve(u);
  d.assembly = op.assembly_seconds();
  d.solve = op.factorization_seconds() + since(t);
  return d;
}

ClusterSolution slice(const DirectResult& d, std::size_t j) {
  ClusterSolution c;
  const auto a = static_cast<std::ptrdiff_t>(d.offsets[j]);
  const auto b = static_cast<std::ptrdiff_t>(d.offsets[j + 1]);
  c.scatterers.assign(d.solution.scatterers.begin() + a, d.solution.scatterers.begin() + b);
  c.amplitudes.assign(d.solution.amplitudes.begin() + a, d.solution.amplitudes.begin() + b);
  c.k = d.solution.k;
  c.method = d.solution.method;
  c.relative_residual = d.solution.relative_residual;
  c.iterations = d.solution.iterations;
  return c;
}

void dropped_warning(json& report, const ClusterSolution& s) {
  if (s.dropped > 0)
    report["warnings"].push_back(std::to_string(s.dropped) +
                                 " rods with permittivity 1 do not scatter and were left out");
}

json solver_json(const ClusterSolution& s) {
  return {{"method", s.method},
          {"relative_residual", s.relative_residual},
          {"iterations", s.iterations},
          {"dropped_rods", s.dropped}};
}

// ---- field maps -----------------------------------------------------------

struct Grid {
  std::vector<Point> points;
  std::vector<int> flags;  // 0 outside, 1 inside an enclosure, 2 inside a rod
  double spacing = 0.0;
  std::size_t side = 0;
};

Grid make_grid(const ScenarioFile& s, const MultiClusterScenario& p) {
  Grid g;
  g.spacing = s.grid.spacing > 0.0 ? s.grid.spacing : s.wavelength / s.grid.points_per_wavelength;
  const double half = s.grid.half_width > 0.0 ? s.grid.half_width : s.observation.radius;
  const double cells = std::floor(2.0 * half / g.spacing + 1e-9);
  if (cells + 1.0 > static_cast<double>(kMaxGridSide))
    throw ConfigError("field-map grid exceeds " + std::to_string(kMaxGridSide) + " points per side");
  g.side = static_cast<std::size_t>(cells) + 1;
  for (std::size_t iy = 0; iy < g.side; ++iy)
    for (std::size_t ix = 0; ix < g.side; ++ix)
      g.points.push_back(s.grid.center + Point{-half + static_cast<double>(ix) * g.spacing,
                                               -half + static_cast<double>(iy) * g.spacing});
  g.flags.assign(g.points.size(), 0);
  for (std::size_t i = 0; i < g.points.size(); ++i) {
    for (const auto& c : p.clusters) {
      if (!c.enclosure.inside_shape(g.points[i])) continue;
      g.flags[i] = 1;
      for (const auto& r : c.scatterers)
        if (distance(r.position, g.points[i]) <= r.radius) g.flags[i] = 2;
    }
  }
  return g;
}

/// Total field on the grid; NaN inside rods, where the monopole model says nothing.
template <class F>
ComplexVector eval_grid(const Grid& g, F&& scattered, const MultiClusterScenario& p) {
  const Complex nan(std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN());
  ComplexVector u(g.points.size(), nan);
  const auto n = static_cast<std::ptrdiff_t>(g.points.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (g.flags[k] == 2) continue;
    u[k] = p.incident(p.k, g.points[k]) + scattered(g.points[k]);
  }
  return u;
}

Table field_map_table(const Grid& g, const ComplexVector& u) {
  double peak = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    if (g.flags[i] != 2) peak = std::max(peak, std::abs(u[i]));
  Table t{{"x1", "x2", "re_u", "im_u", "abs_u", "abs_u_normalized", "inside_flag"}, {}};
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = std::abs(u[i]);
    t.rows.push_back({g.points[i].x, g.points[i].y, u[i].real(), u[i].imag(), a,
                      peak > 0.0 ? a / peak : a, static_cast<double>(g.flags[i])});
  }
  return t;
}

// ---- per-cluster artifacts ------------------------------------------------

Table rods_table(const std::vector<ClusterSolution>& clusters) {
  Table t{{"index", "cluster", "x1", "x2", "radius", "permittivity", "re_s", "im_s"}, {}};
  std::size_t index = 0;
  for (std::size_t j = 0; j < clusters.size(); ++j) {
    const auto& c = clusters[j];
    for (std::size_t q = 0; q < c.scatterers.size(); ++q, ++index) {
      const auto& r = c.scatterers[q];
      t.rows.push_back({static_cast<double>(index), static_cast<double>(j), r.position.x,
                        r.position.y, r.radius, r.permittivity, c.amplitudes[q].real(),
                        c.amplitudes[q].imag()});
    }
  }
  return t;
}

Table layer_table(const MonopoleLayer& layer, std::size_t cluster) {
  Table t{{"p", "arc_length", "y1", "y2", "re_sigma", "im_sigma", "k", "curve"}, {}};
  for (std::size_t p = 0; p < layer.size(); ++p)
    t.rows.push_back({static_cast<double>(p), layer.arc_positions[p], layer.points[p].x,
                      layer.points[p].y, layer.weights[p].real(), layer.weights[p].imag(), layer.k,
                      static_cast<double>(cluster)});
  return t;
}

/// DFT of the weights ordered by signed frequency, with |X_f| / max |X|.
Table spectrum_table(const MonopoleLayer& layer) {
  const auto X = special::dft(layer.weights);
  const std::size_t P = X.size();
  double peak = 0.0;
  for (const auto& x : X) peak = std::max(peak, std::abs(x));
  std::vector<std::pair<double, Complex>> rows;
  for (std::size_t i = 0; i < P; ++i) {
    const double f = i <= P / 2 ? static_cast<double>(i) : static_cast<double>(i) - static_cast<double>(P);
    rows.emplace_back(f, X[i]);
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  Table t{{"frequency", "re_X", "im_X", "abs_X", "abs_X_normalized"}, {}};
  for (const auto& [f, x] : rows)
    t.rows.push_back({f, x.real(), x.imag(), std::abs(x), peak > 0.0 ? std::abs(x) / peak : 0.0});
  return t;
}

json layer_json(std::size_t j, const MonopoleLayer& layer, const FitReport& last,
                const FitReport& selection, const FitConfig& cfg, std::size_t rods) {
  json l = {{"cluster", j},
            {"rods", rods},
            {"P", layer.size()},
            {"M", layer.curve.size()},
            {"kernel", to_string(layer.kernel)},
            {"selection", cfg.P > 0 ? std::string("fixed") : to_string(cfg.selection)},
            {"relative_residual", last.relative_residual},
            {"condition_estimate", last.condition_estimate},
            {"ill_conditioned", last.ill_conditioned},
            {"dft_tail_ratio", last.dft_tail_ratio},
            {"selection_converged", selection.converged}};
  if (selection.check_error >= 0.0) l["check_error"] = selection.check_error;
  return l;
}

void layer_warnings(json& report, const json& layers) {
  for (const auto& l : layers) {
    const std::string c = std::to_string(l["cluster"].get<std::size_t>());
    if (l["ill_conditioned"].get<bool>())
      report["warnings"].push_back("cluster " + c +
                                   ": ill-conditioned layer fit (possible interior resonance)");
    if (!l["selection_converged"].get<bool>())
      report["warnings"].push_back("cluster " + c + ": layer selection thresholds not met");
  }
}

Table observation_pair_table(const BuiltScenario& b, const ComplexVector& reference,
                             const ComplexVector& approx, const std::string& ref_name,
                             const std::string& approx_name) {
  Table t{{"angle", "x1", "x2", "re_" + ref_name, "im_" + ref_name, "re_" + approx_name,
           "im_" + approx_name, "abs_" + ref_name, "abs_" + approx_name},
          {}};
  for (std::size_t i = 0; i < b.observation.size(); ++i)
    t.rows.push_back({b.angles[i], b.observation[i].x, b.observation[i].y, reference[i].real(),
                      reference[i].imag(), approx[i].real(), approx[i].imag(),
                      std::abs(reference[i]), std::abs(approx[i])});
  return t;
}

Table observation_table(const BuiltScenario& b, const ComplexVector& scattered) {
  Table t{{"angle", "x1", "x2", "re_us", "im_us", "re_u", "im_u", "abs_u"}, {}};
  for (std::size_t i = 0; i < b.observation.size(); ++i) {
    const Point x = b.observation[i];
    const Complex u = b.problem.incident(b.problem.k, x) + scattered[i];
    t.rows.push_back({b.angles[i], x.x, x.y, scattered[i].real(), scattered[i].imag(), u.real(),
                      u.imag(), std::abs(u)});
  }
  return t;
}

void observation_warnings(json& report, const BuiltScenario& b) {
  for (std::size_t j = 0; j < b.problem.clusters.size(); ++j)
    for (const auto& x : b.observation)
      if (b.problem.clusters[j].enclosure.inside_shape(x)) {
        report["warnings"].push_back("observation circle enters the enclosure of cluster " +
                                     std::to_string(j));
        break;
      }
}

json fmm_json(const MultiClusterScenario& p, const CoupledSolution& sol) {
  const OperationReport ops = operation_count_report(p, sol);
  json j;
  j["iterations"] = sol.iterations;
  j["converged"] = sol.converged;
  j["convergence_history"] = sol.convergence_history;
  j["counters"] = {{"coupling_evaluations", ops.counters.coupling_evaluations},
                   {"local_evaluations", ops.counters.local_evaluations},
                   {"boundary_evaluations", ops.counters.boundary_evaluations},
                   {"layer_evaluations", ops.counters.layer_evaluations},
                   {"selection_evaluations", ops.counters.selection_evaluations},
                   {"direct_evaluations", ops.direct_evaluations},
                   {"coupling_fraction", ops.coupling_fraction}};
  j["layers"] = json::array();
  for (std::size_t c = 0; c < sol.layers.size(); ++c)
    j["layers"].push_back(layer_json(c, sol.layers[c], sol.fits[c], sol.selections[c], p.fit_for(c),
                                     p.clusters[c].scatterers.size()));
  return j;
}

json fmm_timings(const PhaseTimings& t, double total) {
  return {{"assembly", t.assembly}, {"solve", t.solve},   {"fit", t.fit},
          {"coupling", t.coupling}, {"total", total}};
}

Table convergence_table(const CoupledSolution& sol) {
  Table t{{"iteration", "relative_change"}, {}};
  for (std::size_t i = 0; i < sol.convergence_history.size(); ++i)
    t.rows.push_back({static_cast<double>(i + 1), sol.convergence_history[i]});
  return t;
}

void emit_layers(json& report, const RunOptions& opt, const std::vector<MonopoleLayer>& layers) {
  for (std::size_t j = 0; j < layers.size(); ++j) {
    const std::string id = std::to_string(j);
    emit(report, opt, "layer_" + id + ".csv", layer_table(layers[j], j));
    emit(report, opt, "spectrum_" + id + ".csv", spectrum_table(layers[j]));
    emit(report, opt, "enclosure_" + id + ".csv", points_table(layers[j].curve.samples()));
  }
}

int coupling_outcome(json& report, const CoupledSolution& sol) {
  if (sol.converged) return 0;
  report["status"] = "numerical_failure";
  report["error"] = {{"kind", "numerical"},
                     {"exit_code", 3},
                     {"message", "cluster coupling did not reach its tolerance"},
                     {"iterations", sol.iterations},
                     {"residual", sol.convergence_history.empty() ? -1.0
                                                                  : sol.convergence_history.back()}};
  return 3;
}

struct TimedCoupled {
  CoupledSolution solution;
  double total = 0.0;
};

TimedCoupled coupled(const MultiClusterScenario& p) {
  const auto t = Clock::now();
  CoupledSolution sol = solve_coupled(p);
  return {std::move(sol), since(t)};
}

}  // namespace

RunOutcome run_direct(ScenarioFile s, const RunOptions& opt) {
  const BuiltScenario b = prepare(s, opt);
  json report = base_report(s, b, opt, "direct");
  observation_warnings(report, b);
  const auto& p = b.problem;

  const DirectResult d = measured(opt.bench, [&] { return solve_all(p); });
  const auto t = Clock::now();
  const ComplexVector us = scattered_field_direct(d.solution, b.observation);
  std::optional<Grid> grid;
  ComplexVector map;
  if (s.grid.enabled) {
    grid = make_grid(s, p);
    map = eval_grid(*grid, [&](Point x) { return scattered_field_direct(d.solution, x); }, p);
  }
  const double evaluation = since(t);

  std::vector<ClusterSolution> parts;
  for (std::size_t j = 0; j < p.clusters.size(); ++j) parts.push_back(slice(d, j));
  emit(report, opt, "rods.csv", rods_table(parts));
  emit(report, opt, "observation_direct.csv", observation_table(b, us));
  if (grid) emit(report, opt, "field_map.csv", field_map_table(*grid, map));
  report["solver"] = solver_json(d.solution);
  dropped_warning(report, d.solution);
  report["timings"] = {{"assembly", d.assembly},
                       {"solve", d.solve},
                       {"evaluation", evaluation},
                       {"total", d.assembly + d.solve}};
  return finish(std::move(report), opt);
}

RunOutcome run_fit(ScenarioFile s, const RunOptions& opt) {
  const BuiltScenario b = prepare(s, opt);
  json report = base_report(s, b, opt, "fit");
  observation_warnings(report, b);
  const auto& p = b.problem;

  struct FitRun {
    DirectResult direct;
    CoupledSolution assembled;  // direct amplitudes per cluster with their fitted layers
    std::vector<FitReport> selections;
    double fit = 0.0;
  };
  const FitRun run = measured(opt.bench, [&] {
    FitRun r;
    r.direct = solve_all(p);
    const auto t = Clock::now();
    for (std::size_t j = 0; j < p.clusters.size(); ++j) {
      ClusterSolution part = slice(r.direct, j);
      const FitConfig& cfg = p.fit_for(j);
      const BoundaryCurve& enclosure = p.clusters[j].enclosure;
      std::vector<Point> checks;
      for (const auto& x : b.observation)
        if (!enclosure.inside_shape(x)) checks.push_back(x);
      const auto sampler = [&](std::span<const Point> pts) {
        return scattered_field_direct(part, pts);
      };
      ComplexVector check_values;
      const bool observe = cfg.P == 0 && cfg.selection == SelectionRule::Observation;
      if (observe) check_values = sampler(checks);
      const LayerSize size = choose_layer_size(enclosure, sampler, p.k, cfg, checks, check_values);
      const BoundaryCurve curve = enclosure.resampled(size.M);
      const ComplexVector values = boundary_values(part, curve);
      auto [layer, fit] = LayerFitter(curve, size.P, p.k, cfg.kernel).fit(values);
      FitReport used = fit;
      used.converged = size.selection.converged;
      if (observe) {
        used.check_error = relative_max_error(evaluate_layer(layer, checks), check_values);
        used.converged = used.check_error <= cfg.check_tolerance;
      }
      r.assembled.clusters.push_back(std::move(part));
      r.assembled.layers.push_back(std::move(layer));
      r.assembled.fits.push_back(fit);
      r.selections.push_back(used);
    }
    r.fit = since(t);
    return r;
  });

  const auto t = Clock::now();
  const ComplexVector direct_obs = scattered_field_direct(run.direct.solution, b.observation);
  const ComplexVector layer_obs = global_scattered_field(run.assembled, b.observation);

  json homothety_errors = json::array();
  double worst = 0.0;
  std::vector<Table> traces;
  for (std::size_t j = 0; j < p.clusters.size(); ++j) {
    const BoundaryCurve curve =
        homothety(p.clusters[j].enclosure.resampled(kTracePoints), s.homothety);
    const auto pts = curve.samples();
    const ComplexVector sd = scattered_field_direct(run.direct.solution, pts);
    const ComplexVector sl = global_scattered_field(run.assembled, pts);
    ComplexVector td(pts.size()), tl(pts.size());
    Table trace{{"arc_length", "x1", "x2", "re_total_direct", "im_total_direct", "re_total_layer",
                 "im_total_layer", "re_scattered_direct", "im_scattered_direct",
                 "re_scattered_layer", "im_scattered_layer"},
                {}};
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Complex inc = p.incident(p.k, pts[i]);
      td[i] = inc + sd[i];
      tl[i] = inc + sl[i];
      trace.rows.push_back({curve.arc_lengths()[i], pts[i].x, pts[i].y, td[i].real(), td[i].imag(),
                            tl[i].real(), tl[i].imag(), sd[i].real(), sd[i].imag(), sl[i].real(),
                            sl[i].imag()});
    }
    const double e_total = relative_max_error(tl, td);
    worst = std::max(worst, e_total);
    homothety_errors.push_back({{"cluster", j},
                         {"ratio", s.homothety},
                         {"total_max_relative", e_total},
                         {"scattered_max_relative", relative_max_error(sl, sd)}});
    traces.push_back(std::move(trace));
  }

  std::optional<Grid> grid;
  ComplexVector map_direct, map_layer;
  if (s.grid.enabled) {
    grid = make_grid(s, p);
    map_direct =
        eval_grid(*grid, [&](Point x) { return scattered_field_direct(run.direct.solution, x); }, p);
    map_layer =
        eval_grid(*grid, [&](Point x) { return global_scattered_field(run.assembled, x); }, p);
  }
  const double evaluation = since(t);

  emit(report, opt, "rods.csv", rods_table(run.assembled.clusters));
  emit_layers(report, opt, run.assembled.layers);
  for (std::size_t j = 0; j < traces.size(); ++j)
    emit(report, opt, "homothety_" + std::to_string(j) + ".csv", traces[j]);
  emit(report, opt, "observation_fit.csv",
       observation_pair_table(b, direct_obs, layer_obs, "direct", "layer"));
  if (grid) {
    emit(report, opt, "field_map.csv", field_map_table(*grid, map_direct));
    emit(report, opt, "field_map_layer.csv", field_map_table(*grid, map_layer));
  }

  report["solver"] = solver_json(run.direct.solution);
  dropped_warning(report, run.direct.solution);
  report["layers"] = json::array();
  for (std::size_t j = 0; j < p.clusters.size(); ++j)
    report["layers"].push_back(layer_json(j, run.assembled.layers[j], run.assembled.fits[j],
                                          run.selections[j], p.fit_for(j),
                                          p.clusters[j].scatterers.size()));
  layer_warnings(report, report["layers"]);
  report["errors"] = {{"observation", error_metrics(layer_obs, direct_obs)},
                      {"homothety", homothety_errors},
                      {"homothety_max_relative", worst}};
  report["timings"] = {{"assembly", run.direct.assembly},
                       {"solve", run.direct.solve},
                       {"fit", run.fit},
                       {"evaluation", evaluation},
                       {"total", run.direct.assembly + run.direct.solve + run.fit}};
  return finish(std::move(report), opt);
}

RunOutcome run_fmm(ScenarioFile s, const RunOptions& opt) {
  const BuiltScenario b = prepare(s, opt);
  json report = base_report(s, b, opt, "fmm");
  observation_warnings(report, b);
  const auto& p = b.problem;

  const TimedCoupled run = measured(opt.bench, [&] { return coupled(p); });
  const auto& sol = run.solution;
  const auto t = Clock::now();
  const ComplexVector us = global_scattered_field(sol, b.observation);
  std::optional<Grid> grid;
  ComplexVector map;
  if (s.grid.enabled) {
    grid = make_grid(s, p);
    map = eval_grid(*grid, [&](Point x) { return global_scattered_field(sol, x); }, p);
  }
  const double evaluation = since(t);

  emit(report, opt, "rods.csv", rods_table(sol.clusters));
  emit_layers(report, opt, sol.layers);
  emit(report, opt, "convergence.csv", convergence_table(sol));
  emit(report, opt, "observation_fmm.csv", observation_table(b, us));
  if (grid) emit(report, opt, "field_map.csv", field_map_table(*grid, map));

  report.update(fmm_json(p, sol));
  layer_warnings(report, report["layers"]);
  json timings = fmm_timings(sol.timings, run.total);
  timings["evaluation"] = evaluation;
  report["timings"] = timings;
  const int code = coupling_outcome(report, sol);
  return finish(std::move(report), opt, code);
}

RunOutcome run_compare(ScenarioFile s, const RunOptions& opt) {
  const BuiltScenario b = prepare(s, opt);
  json report = base_report(s, b, opt, "compare");
  observation_warnings(report, b);
  const auto& p = b.problem;

  const DirectResult d = measured(opt.bench, [&] { return solve_all(p); });
  const TimedCoupled run = measured(opt.bench, [&] { return coupled(p); });
  const auto& sol = run.solution;

  auto t = Clock::now();
  const ComplexVector direct_obs = scattered_field_direct(d.solution, b.observation);
  const double direct_eval = since(t);
  t = Clock::now();
  const ComplexVector fmm_obs = global_scattered_field(sol, b.observation);
  const double fmm_eval = since(t);

  emit(report, opt, "observation_compare.csv",
       observation_pair_table(b, direct_obs, fmm_obs, "direct", "fmm"));
  emit_layers(report, opt, sol.layers);
  emit(report, opt, "convergence.csv", convergence_table(sol));

  report["solver"] = solver_json(d.solution);
  dropped_warning(report, d.solution);
  report.update(fmm_json(p, sol));
  layer_warnings(report, report["layers"]);
  report["errors"] = {{"observation", error_metrics(fmm_obs, direct_obs)}};
  const double direct_total = d.assembly + d.solve;
  json fmm_t = fmm_timings(sol.timings, run.total);
  fmm_t["evaluation"] = fmm_eval;
  report["timings"] = {{"direct",
                        {{"assembly", d.assembly},
                         {"solve", d.solve},
                         {"evaluation", direct_eval},
                         {"total", direct_total}}},
                       {"fmm", fmm_t},
                       {"ratio", run.total > 0.0 ? direct_total / run.total : 0.0}};
  const int code = coupling_outcome(report, sol);
  return finish(std::move(report), opt, code);
}

RunOutcome run_validate(ScenarioFile s, const RunOptions& opt) {
  const BuiltScenario b = prepare(s, opt);
  json report = base_report(s, b, opt, "validate");
  observation_warnings(report, b);
  report["scenario_resolved"] = to_json(s);
  report["enclosures"] = json::array();
  for (const auto& c : b.problem.clusters)
    report["enclosures"].push_back({{"length", c.enclosure.length()},
                                    {"center", json::array({c.enclosure.center().x, c.enclosure.center().y})},
                                    {"max_radius", c.enclosure.shape().max_radius()}});
  return finish(std::move(report), opt);
}

RunOutcome run_verb(const std::string& verb, const std::filesystem::path& scenario,
                    RunOptions opt) {
  using Runner = RunOutcome (*)(ScenarioFile, const RunOptions&);
  Runner runner = nullptr;
  if (verb == "direct") runner = run_direct;
  else if (verb == "fit") runner = run_fit;
  else if (verb == "fmm") runner = run_fmm;
  else if (verb == "compare") runner = run_compare;
  else if (verb == "validate") runner = run_validate;
  else throw ConfigError("unknown verb '" + verb + "'");
  opt.scenario_path = scenario.string();
  return runner(load_scenario(scenario), opt);
}

int exit_code_for(const Error& e) { return e.kind() == ErrorKind::Numerical ? 3 : 2; }

json error_json(const std::exception& e) {
  json err;
  if (const auto* fe = dynamic_cast<const Error*>(&e)) {
    err = {{"kind", to_string(fe->kind())}, {"exit_code", exit_code_for(*fe)}, {"message", fe->what()}};
    if (const auto* ne = dynamic_cast<const NumericalError*>(&e)) {
      err["residual"] = ne->residual();
      err["iterations"] = ne->iterations();
    }
  } else if (dynamic_cast<const json::exception*>(&e) != nullptr) {
    err = {{"kind", "config"}, {"exit_code", 2}, {"message", e.what()}};
  } else {
    err = {{"kind", "internal"}, {"exit_code", 1}, {"message", e.what()}};
  }
  return {{"error", err}};
}

}  // namespace fastmono::cli
