#pragma once

// Clustered multiple scattering. Each cluster is solved against its own
// incident field plus the monopole layers of the other clusters sampled at
// its rod centers; the layers are refitted after every local solve and the
// block iteration runs until the layer weights stop changing.

#include <chrono>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fastmono/errors.hpp"
#include "fastmono/foldy_lax.hpp"
#include "fastmono/geometry.hpp"
#include "fastmono/monopole_layer.hpp"
#include "fastmono/types.hpp"

namespace fastmono {

struct CouplingConfig {
  enum class Scheme { GaussSeidel, Jacobi };
  Scheme scheme = Scheme::GaussSeidel;
  double tolerance = 1e-8;  // on max_j ||sigma_j - sigma_j_prev|| / ||sigma_j||
  int max_iterations = 200;
  int divergence_window = 3;  // consecutive increases of the weight step that abort
};

struct MultiClusterScenario {
  std::vector<Cluster> clusters;
  IncidentField incident;
  WaveNumber k{1.0};
  CouplingConfig coupling;
  SolverConfig solver;
  FitConfig fit;                        // shared default
  std::vector<FitConfig> cluster_fit;   // empty, or one entry per cluster
  std::vector<Point> check_points;      // used by the observation selection rule
  const FitConfig& fit_for(std::size_t j) const {
    return cluster_fit.empty() ? fit : cluster_fit.at(j);
  }
  std::size_t total_rods() const {
    std::size_t n = 0;
    for (const auto& c : clusters) n += c.scatterers.size();
    return n;
  }
};

/// Each cluster valid on its own, enclosures disjoint, and no rod inside a
/// foreign enclosure.
inline void validate_scenario(const MultiClusterScenario& sc) {
  if (sc.clusters.empty()) throw ConfigError("degenerate scenario: no clusters");
  if (!sc.cluster_fit.empty() && sc.cluster_fit.size() != sc.clusters.size())
    throw ConfigError("per-cluster fit settings must match the cluster count");
  for (std::size_t j = 0; j < sc.clusters.size(); ++j) {
    if (sc.clusters[j].scatterers.empty())
      throw GeometryError("degenerate scenario: cluster " + std::to_string(j) + " has no rods");
    validate_cluster(sc.clusters[j]);
  }
  for (std::size_t j = 0; j < sc.clusters.size(); ++j) {
    for (std::size_t l = 0; l < sc.clusters.size(); ++l) {
      if (l == j) continue;
      const auto& foreign = sc.clusters[l].enclosure;
      for (std::size_t q = 0; q < sc.clusters[j].scatterers.size(); ++q)
        if (foreign.inside_shape(sc.clusters[j].scatterers[q].position))
          throw GeometryError("rod " + std::to_string(q) + " of cluster " + std::to_string(j) +
                              " lies inside the enclosure of cluster " + std::to_string(l));
      for (const auto& p : sc.clusters[j].enclosure.samples())
        if (foreign.inside_shape(p))
          throw GeometryError("enclosures of clusters " + std::to_string(j) + " and " +
                              std::to_string(l) + " overlap");
    }
  }
}

struct PhaseTimings {
  double assembly = 0.0;
  double solve = 0.0;
  double fit = 0.0;
  double coupling = 0.0;
  double evaluation = 0.0;
};

struct CouplingCounters {
  std::size_t coupling_evaluations = 0;   // foreign layer terms evaluated at rod centers
  std::size_t local_evaluations = 0;      // intra-cluster Hankel terms
  std::size_t boundary_evaluations = 0;   // rod-to-curve terms for boundary values
  std::size_t layer_evaluations = 0;      // collocation-matrix kernel terms
  std::size_t selection_evaluations = 0;  // field samples spent choosing P
};

struct CoupledSolution {
  std::vector<ClusterSolution> clusters;
  std::vector<MonopoleLayer> layers;
  std::vector<FitReport> fits;        // last fit of each cluster
  std::vector<FitReport> selections;  // fit that fixed P for each cluster
  int iterations = 0;
  std::vector<double> convergence_history;
  bool converged = false;
  CouplingCounters counters;
  PhaseTimings timings;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// ||now - before||_2 squared.
inline double squared_step(const ComplexVector& now, const ComplexVector& before) {
  double diff = 0.0;
  for (std::size_t i = 0; i < now.size(); ++i)
    diff += std::norm(now[i] - (i < before.size() ? before[i] : Complex(0.0)));
  return diff;
}

inline double relative_change(const ComplexVector& now, const ComplexVector& before) {
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < now.size(); ++i) {
    const Complex old = i < before.size() ? before[i] : Complex(0.0);
    diff += std::norm(now[i] - old);
    ref += std::norm(now[i]);
  }
  if (ref == 0.0) return diff == 0.0 ? 0.0 : 1.0;
  return std::sqrt(diff / ref);
}

}  // namespace detail

/// u_inc(x_q) + sum_{l != j} layer_l(x_q) for every rod of cluster j. Layers
/// with no weights count as zero.
inline ComplexVector local_incident_values(const MultiClusterScenario& sc, std::size_t j,
                                           std::span<const MonopoleLayer> layers,
                                           std::size_t* evaluations = nullptr) {
  if (j >= sc.clusters.size()) throw DomainError("cluster index out of range");
  const auto& rods = sc.clusters[j].scatterers;
  ComplexVector u = incident_values(rods, sc.incident, sc.k);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (l == j || layers[l].weights.empty()) continue;
    for (std::size_t q = 0; q < rods.size(); ++q)
      if (layers[l].curve.inside_shape(rods[q].position))
        throw GeometryError("rod " + std::to_string(q) + " of cluster " + std::to_string(j) +
                            " lies inside a foreign enclosure");
    bool zero = true;
    for (const auto& w : layers[l].weights) zero = zero && w == Complex(0.0);
    if (zero) continue;
    const auto n = static_cast<std::ptrdiff_t>(rods.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t q = 0; q < n; ++q)
      u[static_cast<std::size_t>(q)] +=
          evaluate_layer(layers[l], rods[static_cast<std::size_t>(q)].position);
    if (evaluations != nullptr) *evaluations += rods.size() * layers[l].size();
  }
  return u;
}

struct LocalResult {
  ClusterSolution solution;
  MonopoleLayer layer;
  FitReport report;
};

/// Solves one cluster against the given driving values and fits its layer
/// with P monopoles on the enclosure sampled at M points.
inline LocalResult local_solve(const Cluster& cluster, std::span<const Complex> driving,
                               WaveNumber k, std::size_t P, std::size_t M,
                               LayerKernel kernel = LayerKernel::Quadrature,
                               const SolverConfig& solver = {}) {
  const FoldyLaxOperator op(cluster.scatterers, k, solver);
  ClusterSolution solution = op.solve(driving);
  const BoundaryCurve curve = cluster.enclosure.resampled(M);
  const ComplexVector values = boundary_values(solution, curve);
  auto [layer, report] = LayerFitter(curve, P, k, kernel).fit(values);
  return {std::move(solution), std::move(layer), report};
}

namespace detail {

struct ClusterState {
  std::optional<FoldyLaxOperator> op;
  std::optional<LayerFitter> fitter;
  ComplexMatrix boundary;  // M x N_j
};

}  // namespace detail

/// Block fixed-point iteration over clusters (Gauss-Seidel by default).
/// P is chosen for each cluster on its first local solve when not fixed and
/// is kept for the rest of the iteration.
inline CoupledSolution solve_coupled(const MultiClusterScenario& sc) {
  validate_scenario(sc);
  const std::size_t n = sc.clusters.size();
  CoupledSolution out;
  out.clusters.resize(n);
  out.layers.resize(n);
  out.fits.resize(n);
  out.selections.resize(n);
  std::vector<detail::ClusterState> state(n);

  for (std::size_t j = 0; j < n; ++j) {
    state[j].op.emplace(sc.clusters[j].scatterers, sc.k, sc.solver);
    out.counters.local_evaluations += state[j].op->kernel_evaluations();
    out.timings.assembly += state[j].op->assembly_seconds();
    out.timings.solve += state[j].op->factorization_seconds();
  }

  auto update = [&](std::size_t j, std::span<const MonopoleLayer> sources) {
    auto t = detail::Clock::now();
    const ComplexVector driving =
        local_incident_values(sc, j, sources, &out.counters.coupling_evaluations);
    out.timings.coupling += detail::seconds_since(t);

    t = detail::Clock::now();
    out.clusters[j] = state[j].op->solve(driving);
    out.timings.solve += detail::seconds_since(t);

    t = detail::Clock::now();
    auto& st = state[j];
    const FitConfig& cfg = sc.fit_for(j);
    std::vector<Point> checks;
    if (!st.fitter) {
      const ClusterSolution& current = out.clusters[j];
      const bool observe = cfg.P == 0 && cfg.selection == SelectionRule::Observation;
      ComplexVector check_values;
      if (observe) {
        for (const auto& x : sc.check_points)
          if (!sc.clusters[j].enclosure.inside_shape(x)) checks.push_back(x);
        check_values = scattered_field_direct(current, checks);
        out.counters.selection_evaluations += checks.size() * current.scatterers.size();
      }
      std::size_t sampled = 0;
      const LayerSize size = choose_layer_size(
          sc.clusters[j].enclosure,
          [&](std::span<const Point> pts) {
            sampled += pts.size() * current.scatterers.size();
            return scattered_field_direct(current, pts);
          },
          sc.k, cfg, checks, check_values);
      out.counters.selection_evaluations += sampled;
      const BoundaryCurve curve = sc.clusters[j].enclosure.resampled(size.M);
      st.boundary = boundary_matrix(sc.clusters[j].scatterers, curve, sc.k);
      out.counters.boundary_evaluations += curve.size() * sc.clusters[j].scatterers.size();
      st.fitter.emplace(curve, size.P, sc.k, cfg.kernel);
      out.counters.layer_evaluations += st.fitter->kernel_evaluations();
      const EigenVector values = st.boundary * to_eigen(current.amplitudes);
      auto [layer, report] = st.fitter->fit(from_eigen(values));
      // Record the fit actually used (M = m_per_p * P), re-checked where the rule asks for it.
      FitReport used = report;
      used.converged = size.selection.converged;
      if (observe) {
        used.check_error = relative_max_error(evaluate_layer(layer, checks), check_values);
        used.converged = used.check_error <= cfg.check_tolerance;
      }
      out.selections[j] = used;
      out.layers[j] = std::move(layer);
      out.fits[j] = report;
      out.timings.fit += detail::seconds_since(t);
      return;
    }
    const EigenVector values = st.boundary * to_eigen(out.clusters[j].amplitudes);
    auto [layer, report] = st.fitter->fit(from_eigen(values));
    out.layers[j] = std::move(layer);
    out.fits[j] = report;
    out.timings.fit += detail::seconds_since(t);
  };

  std::vector<double> steps;
  for (int it = 1; it <= sc.coupling.max_iterations; ++it) {
    std::vector<ComplexVector> previous(n);
    for (std::size_t j = 0; j < n; ++j) previous[j] = out.layers[j].weights;

    if (sc.coupling.scheme == CouplingConfig::Scheme::Jacobi) {
      const std::vector<MonopoleLayer> snapshot = out.layers;
      for (std::size_t j = 0; j < n; ++j) update(j, snapshot);
    } else {
      for (std::size_t j = 0; j < n; ++j) update(j, out.layers);
    }
    out.iterations = it;

    double change = 0.0, step = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      change = std::max(change, detail::relative_change(out.layers[j].weights, previous[j]));
      step += detail::squared_step(out.layers[j].weights, previous[j]);
    }
    if (n == 1) change = 0.0;
    out.convergence_history.push_back(change);
    steps.push_back(std::sqrt(step));

    if (change <= sc.coupling.tolerance) {
      out.converged = true;
      break;
    }
    const auto w = static_cast<std::size_t>(std::max(1, sc.coupling.divergence_window));
    if (steps.size() > w) {
      bool growing = true;
      for (std::size_t i = steps.size() - w; i < steps.size(); ++i)
        growing = growing && steps[i] > steps[i - 1];
      if (growing)
        throw NumericalError("cluster coupling iteration diverges", change, it);
    }
  }
  return out;
}

/// True when the layer of `layer` may stand in for its cluster at x: x lies
/// outside the enclosure and at least one monopole spacing away from it.
inline bool layer_valid_at(const MonopoleLayer& layer, Point x) {
  if (layer.curve.inside_shape(x)) return false;
  const double spacing = layer.curve.length() / static_cast<double>(std::max<std::size_t>(1, layer.size()));
  return boundary_distance(layer.curve, x) >= spacing;
}

/// sum_j of the layer of cluster j, or its rod sum where the layer is not valid.
inline Complex global_scattered_field(const CoupledSolution& solution, Point x) {
  Complex sum = 0.0;
  for (std::size_t j = 0; j < solution.clusters.size(); ++j) {
    const auto& layer = solution.layers[j];
    if (!layer.weights.empty() && layer_valid_at(layer, x))
      sum += evaluate_layer(layer, x);
    else
      sum += scattered_field_direct(solution.clusters[j], x);
  }
  return sum;
}

inline ComplexVector global_scattered_field(const CoupledSolution& solution,
                                            std::span<const Point> xs) {
  ComplexVector out(xs.size());
  const auto n = static_cast<std::ptrdiff_t>(xs.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = global_scattered_field(solution, xs[static_cast<std::size_t>(i)]);
  return out;
}

struct OperationReport {
  std::size_t total_rods = 0;
  std::size_t clusters = 0;
  std::size_t coupling_evaluations = 0;
  std::size_t direct_evaluations = 0;  // N^2
  double coupling_fraction = 0.0;      // coupling / N^2
  CouplingCounters counters;
  PhaseTimings timings;
  int iterations = 0;
  std::vector<std::size_t> P;
  std::vector<std::size_t> M;
};

inline OperationReport operation_count_report(const MultiClusterScenario& sc,
                                              const CoupledSolution& solution) {
  OperationReport r;
  r.total_rods = sc.total_rods();
  r.clusters = sc.clusters.size();
  r.coupling_evaluations = solution.counters.coupling_evaluations;
  r.direct_evaluations = r.total_rods * r.total_rods;
  r.coupling_fraction = r.direct_evaluations > 0
                            ? static_cast<double>(r.coupling_evaluations) /
                                  static_cast<double>(r.direct_evaluations)
                            : 0.0;
  r.counters = solution.counters;
  r.timings = solution.timings;
  r.iterations = solution.iterations;
  for (const auto& layer : solution.layers) {
    r.P.push_back(layer.size());
    r.M.push_back(layer.curve.size());
  }
  return r;
}

}  // namespace fastmono
