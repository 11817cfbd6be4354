// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "fastmono/fast_monopole.hpp"
#include "runner.hpp"
#include "scenario.hpp"

namespace {

namespace fs = std::filesystem;
using namespace fastmono;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  return xs;
}

std::vector<Point> ring(Point c, double radius, std::size_t n) {
  std::vector<Point> pts;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
    pts.push_back(c + Point{radius * std::cos(a), radius * std::sin(a)});
  }
  return pts;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fastmono_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

nlohmann::json run(const char* verb, const std::string& scenario) {
  cli::RunOptions opt;
  opt.out = scratch(scenario);
  const auto outcome = cli::run_verb(verb, fs::path(FASTMONO_SCENARIO_DIR) / scenario, opt);
  if (outcome.exit_code != 0) throw NumericalError(scenario + " finished with exit code " +
                                                   std::to_string(outcome.exit_code));
  return outcome.report;
}

double mean_p(const nlohmann::json& report) {
  double sum = 0.0;
  for (const auto& l : report["layers"]) sum += l["P"].get<double>();
  return sum / static_cast<double>(report["layers"].size());
}

Outcome unitarity() {
  double worst = 0.0;
  for (double eps : {2.0, 4.0, 12.0})
    for (double kr : log_grid(1e-3, 1.0, 100))
      worst = std::max(worst, std::fabs(std::abs(1.0 + 2.0 * t_coeff(WaveNumber(1.0), kr, eps)) - 1.0));
  return {worst < 1e-10, fmt("max ||1+2t|-1| = %.3g", worst)};
}

Outcome special_functions() {
  double wronskian = 0.0;
  for (double x : log_grid(0.1, 1000.0, 200)) {
    const auto a = special::bessel_jy(0, x), b = special::bessel_jy(1, x);
    const double w = b.j * a.y - a.j * b.y;
    const double expected = 2.0 / (kPi * x);
    wronskian = std::max(wronskian, std::fabs(w - expected) / expected);
  }

  double parseval = 0.0;
  std::mt19937_64 gen(11);
  std::normal_distribution<double> n;
  for (std::size_t len : {1u, 7u, 64u, 101u, 360u}) {
    ComplexVector v(len);
    for (auto& z : v) z = {n(gen), n(gen)};
    const auto X = special::dft(v);
    double time = 0.0, freq = 0.0;
    for (const auto& z : v) time += std::norm(z);
    for (const auto& z : X) freq += std::norm(z);
    parseval = std::max(parseval, std::fabs(freq / static_cast<double>(len) - time) / time);
  }

  double green = 0.0;
  for (double lambda : {0.5, 1.0, 3.0}) {
    const WaveNumber k = WaveNumber::from_wavelength(lambda);
    const double r = 1e3 * lambda;
    const Complex asym = Complex(0.0, -0.25) * std::sqrt(2.0 / (kPi * k.value() * r)) *
                         std::polar(1.0, k.value() * r - kPi / 4);
    const Complex g = special::green2d(k, r);
    green = std::max(green, std::abs(g - asym) / std::abs(g));
  }
  return {wronskian < 1e-10 && parseval < 1e-12 && green < 5e-3,
          fmt("wronskian %.3g", wronskian) + fmt(", parseval %.3g", parseval) +
              fmt(", green2d asymptote %.3g", green)};
}

Outcome point_source_layer() {
  const auto t = Clock::now();
  const WaveNumber k = WaveNumber::from_wavelength(1.0);
  const Point c{0.0, 0.0}, source{0.3, -0.2};
  const double R = 1.0;
  const auto source_field = [&](std::span<const Point> xs) {
    ComplexVector v;
    for (const auto& x : xs) v.push_back(special::green2d(k, distance(x, source)));
    return v;
  };
  const auto curve = make_circle(R, c, 128);
  auto [layer, report] = LayerFitter(curve, 32, k).fit(source_field(curve.samples()));
  const auto test = ring(c, 2.0 * R, 360);
  const double err = relative_max_error(evaluate_layer(layer, test), source_field(test));
  const double elapsed = seconds(t);
  return {err < 1e-6 && elapsed < 1.0, fmt("error at 2R %.3g", err) + fmt(", %.3f s", elapsed)};
}

Outcome single_trefoil() {
  const auto t = Clock::now();
  const auto r = run("fit", "trefoil_single.json");
  const double err = r["errors"]["homothety_max_relative"].get<double>();
  const auto& l = r["layers"][0];
  const bool auto_p = l["selection"] == "spectrum";
  return {err < 0.015 && auto_p,
          fmt("N %.0f", r["rods"].get<double>()) + fmt(", P %.0f", l["P"].get<double>()) +
              fmt(", homothety-1.3 error %.3g", err) + fmt(", %.1f s", seconds(t))};
}

Outcome five_trefoils(std::vector<double>& mean_ps) {
  const auto t = Clock::now();
  bool pass = true;
  std::string detail;
  for (const char* name : {"trefoil_five_l20.json", "trefoil_five_l10.json", "trefoil_five_l5.json"}) {
    const auto r = run("compare", name);
    const double err = r["errors"]["observation"]["max_relative"].get<double>();
    pass = pass && err < 0.015;
    mean_ps.push_back(mean_p(r));
    detail += fmt("lambda %.0f: ", r["wavelength"].get<double>()) + fmt("%.3g; ", err);
  }
  return {pass, detail + fmt("%.1f s", seconds(t))};
}

Outcome p_scaling(const std::vector<double>& p) {
  if (p.size() != 3) return {false, "criterion 5 runs missing"};
  const bool monotone = p[0] < p[1] && p[1] < p[2];
  const double ratio = p[1] / p[0];
  return {monotone && ratio >= 1.5 && ratio <= 3.0,
          fmt("mean P %.1f", p[0]) + fmt(" / %.1f", p[1]) + fmt(" / %.1f", p[2]) +
              fmt(", P(10)/P(20) = %.2f", ratio)};
}

Outcome speedup() {
  const auto r = run("compare", "trefoil_five_speedup.json");
  const double n = r["rods"].get<double>();
  const double ratio = r["timings"]["ratio"].get<double>();
  const double fraction = r["counters"]["coupling_fraction"].get<double>();
  const bool shape = n >= 2000 && r["layers"].size() == 5;
  return {shape && ratio > 2.0 && fraction < 0.1,
          fmt("N %.0f", n) + fmt(", direct %.2f s", r["timings"]["direct"]["total"].get<double>()) +
              fmt(", fmm %.2f s", r["timings"]["fmm"]["total"].get<double>()) +
              fmt(", ratio %.2f", ratio) + fmt(", coupling/N^2 %.3f", fraction)};
}

Cluster random_cluster(Point center, std::size_t cap, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double R = 0.6 + 0.4 * u(gen);
  const double rotation = 2.0 * kPi * u(gen);
  const double eps = u(gen) < 0.5 ? 4.0 : 12.0;
  const auto curve = make_trefoil(R, 0.2 * R, 3, center, rotation, 512);
  const double pitch = std::max(0.1, std::sqrt(kPi * R * R * 1.1 / static_cast<double>(cap)));
  const auto seed = static_cast<std::uint64_t>(gen());
  auto rods = fill_with_rods(curve, pitch, 0.02, eps, 0.0, seed);
  if (rods.size() > cap)
    rods = fill_with_rods(curve, pitch, 0.02, eps, 1.0 - static_cast<double>(cap) / rods.size(), seed);
  return {std::move(rods), homothety(curve, 1.15)};
}

MultiClusterScenario random_scenario(std::size_t clusters, std::mt19937_64& gen, double& outer) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MultiClusterScenario sc;
  sc.k = WaveNumber::from_wavelength(1.0 + 1.5 * u(gen));
  const double a = 2.0 * kPi * u(gen);
  sc.incident = make_plane_wave({std::cos(a), std::sin(a)});
  const std::size_t cap = 600 / clusters;
  const double reach = 1.15 * 1.2 * 1.0;
  const double gap = 0.3 + 1.2 * u(gen);
  const double D = clusters == 1 ? 0.0 : (reach + gap / 2) / std::sin(kPi / static_cast<double>(clusters));
  const double phase = 2.0 * kPi * u(gen);
  for (std::size_t j = 0; j < clusters; ++j) {
    const double b = phase + 2.0 * kPi * static_cast<double>(j) / static_cast<double>(clusters);
    sc.clusters.push_back(random_cluster({D * std::cos(b), D * std::sin(b)}, cap, gen));
  }
  outer = D + reach + 2.0;
  return sc;
}

ClusterSolution direct_all(const MultiClusterScenario& sc) {
  std::vector<Scatterer> rods;
  for (const auto& c : sc.clusters) rods.insert(rods.end(), c.scatterers.begin(), c.scatterers.end());
  return solve_direct(rods, sc.incident, sc.k, sc.solver);
}

Outcome oracle_equivalence() {
  std::mt19937_64 gen(2024);
  double worst = 0.0, bound = 0.0;
  std::size_t largest = 0;
  bool ok = true;
  for (int trial = 0; trial < 20; ++trial) {
    double outer = 0.0;
    const auto sc = random_scenario(2 + static_cast<std::size_t>(trial % 3), gen, outer);
    largest = std::max(largest, sc.total_rods());
    bound = 5.0 * sc.fit.residual_cap;
    const auto coupled = solve_coupled(sc);
    const auto pts = ring({}, outer, 360);
    const double err =
        relative_max_error(global_scattered_field(coupled, pts), scattered_field_direct(direct_all(sc), pts));
    ok = ok && coupled.converged && err < bound && sc.total_rods() <= 600;
    worst = std::max(worst, err);
  }
  double single = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    double outer = 0.0;
    const auto sc = random_scenario(1, gen, outer);
    const auto coupled = solve_coupled(sc);
    single = std::max(single, relative_max_error(coupled.clusters[0].amplitudes, direct_all(sc).amplitudes));
  }
  ok = ok && single <= 1e-12;
  return {ok, fmt("multi-cluster worst %.3g", worst) + fmt(" (bound %.3g)", bound) +
                  fmt(", largest N %.0f", static_cast<double>(largest)) +
                  fmt(", single-cluster amplitudes %.3g", single)};
}

Outcome far_field() {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n;
  const WaveNumber k = WaveNumber::from_wavelength(1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const double R = (0.3 + 0.4 * u(gen)) * k.wavelength();
    const Point c{0.1 * (u(gen) - 0.5), 0.1 * (u(gen) - 0.5)};
    const std::size_t P = 6 + static_cast<std::size_t>(40 * u(gen));
    MonopoleLayer layer;
    layer.curve = make_trefoil(R, 0.3 * u(gen) * R, 3, c, 2.0 * kPi * u(gen), 10 * P);
    layer.arc_positions = monopole_arc_positions(layer.curve, P, LayerKernel::Quadrature);
    layer.points = monopole_points(layer.curve, layer.arc_positions, LayerKernel::Quadrature);
    for (std::size_t p = 0; p < P; ++p) layer.weights.emplace_back(n(gen), n(gen));
    layer.k = k.value();
    const double a = 2.0 * kPi * u(gen);
    const Point d{std::cos(a), std::sin(a)};
    const double r = 1e4 * k.wavelength();
    const Complex direct = evaluate_layer(layer, r * d);
    const Complex asym = far_field_asymptote(far_field_amplitude(layer, d), k.value(), r);
    worst = std::max(worst, std::abs(direct - asym) / std::abs(direct));
  }
  return {worst < 1e-3, fmt("worst relative difference %.3g", worst)};
}

}  // namespace

int main() {
  std::vector<double> mean_ps;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"lossless unitarity", unitarity},
      {"special functions", special_functions},
      {"point-source layer", point_source_layer},
      {"single trefoil homothety", single_trefoil},
      {"five trefoils compare", [&] { return five_trefoils(mean_ps); }},
      {"P scaling with wavelength", [&] { return p_scaling(mean_ps); }},
      {"speedup", speedup},
      {"oracle equivalence", oracle_equivalence},
      {"far field", far_field},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("criterion %zu %s: %s (%s)\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
