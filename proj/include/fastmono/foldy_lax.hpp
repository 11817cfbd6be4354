#pragma once

// Monopole-only multiple scattering by small circular dielectric rods.
//
// Each rod q answers to its local driving field with a single outgoing term
// s_q H0(k|x - x_q|), s_q = t_q * (u_inc(x_q) + sum_{j != q} s_j H0(k|x_q - x_j|)),
// which gives the linear system (diag(1/t) - h) s = u_inc.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fastmono/errors.hpp"
#include "fastmono/geometry.hpp"
#include "fastmono/linear_algebra.hpp"
#include "fastmono/special_functions.hpp"
#include "fastmono/types.hpp"

namespace fastmono {

/// Plane wave amplitude * exp(i k d.x).
struct IncidentField {
  Point direction{0.0, -1.0};
  Complex amplitude{1.0, 0.0};

  Complex operator()(WaveNumber k, Point x) const {
    return amplitude * std::polar(1.0, k.value() * dot(direction, x));
  }
};

inline IncidentField make_plane_wave(Point direction, Complex amplitude = 1.0) {
  if (std::fabs(norm(direction) - 1.0) > 1e-12)
    throw ConfigError("plane-wave direction must be a unit vector");
  if (!std::isfinite(amplitude.real()) || !std::isfinite(amplitude.imag()))
    throw ConfigError("plane-wave amplitude must be finite");
  return {direction, amplitude};
}

/// Monopole scattering coefficient of a rod of radius r and permittivity nu^2:
/// t = -(J1(kr)J0(k nu r) - nu J0(kr)J1(k nu r)) / (H1(kr)J0(k nu r) - nu H0(kr)J1(k nu r)).
inline Complex t_coeff(WaveNumber k, double r, double permittivity) {
  if (!(r > 0.0)) throw DomainError("rod radius must be > 0");
  if (!(permittivity >= 1.0) || !std::isfinite(permittivity))
    throw DomainError("permittivity must be real and >= 1");
  const double nu = std::sqrt(permittivity);
  const double x = k.value() * r;
  const auto out0 = special::bessel_jy(0, x);
  const auto out1 = special::bessel_jy(1, x);
  const double in0 = special::bessel_j(0, nu * x);
  const double in1 = special::bessel_j(1, nu * x);

  const double numerator = out1.j * in0 - nu * out0.j * in1;
  const Complex h0(out0.j, out0.y), h1(out1.j, out1.y);
  const Complex denominator = h1 * in0 - nu * h0 * in1;
  const double scale = std::abs(h1 * in0) + std::abs(nu * h0 * in1);
  if (std::abs(denominator) < 1e-14 * scale)
    throw NumericalError("vanishing denominator in rod scattering coefficient");
  return -numerator / denominator;
}

/// h_ij = H0(k |x_i - x_j|) off the diagonal, zero on it.
inline ComplexMatrix assemble_interaction(std::span<const Scatterer> rods, WaveNumber k) {
  const auto n = static_cast<Eigen::Index>(rods.size());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (rods[i].position == rods[j].position)
        throw GeometryError("coincident rod centers at indices " + std::to_string(i) + ", " +
                            std::to_string(j));
  ComplexMatrix h = ComplexMatrix::Zero(n, n);
  const double kv = k.value();
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Complex v = special::hankel1(0, kv * distance(rods[i].position, rods[j].position));
      h(i, j) = v;
      h(j, i) = v;
    }
  }
  return h;
}

struct SolverConfig {
  enum class Mode { Auto, Dense, Iterative };
  Mode mode = Mode::Auto;
  double rtol = 1e-10;
  std::size_t direct_max = 2000;  // Auto switches to GMRES above this size
  int restart = 80;
  int max_iterations = 2000;
};

struct ClusterSolution {
  std::vector<Scatterer> scatterers;
  ComplexVector amplitudes;
  double k = 1.0;
  double relative_residual = 0.0;
  int iterations = 0;         // 0 for the dense route
  std::size_t dropped = 0;    // rods with t = 0 (permittivity 1), amplitude fixed at 0
  std::string method = "dense";

  WaveNumber wavenumber() const { return WaveNumber(k); }
};

/// The operator diag(1/t) - h of one rod set, assembled and factorized once
/// so repeated solves with different driving values only pay for the solve.
class FoldyLaxOperator {
 public:
  FoldyLaxOperator(std::vector<Scatterer> rods, WaveNumber k, SolverConfig cfg = {})
      : rods_(std::move(rods)), k_(k), cfg_(cfg) {
    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    validate_scatterers(rods_);
    for (std::size_t q = 0; q < rods_.size(); ++q) {
      const Complex t = t_coeff(k_, rods_[q].radius, rods_[q].permittivity);
      if (std::abs(t) < 1e-300) continue;
      active_.push_back(q);
      t_.push_back(t);
    }
    std::vector<Scatterer> active_rods;
    active_rods.reserve(active_.size());
    for (auto q : active_) active_rods.push_back(rods_[q]);
    matrix_ = -assemble_interaction(active_rods, k_);
    for (std::size_t a = 0; a < active_.size(); ++a) {
      const auto i = static_cast<Eigen::Index>(a);
      matrix_(i, i) = Complex(1.0) / t_[a];
    }
    const auto n = active_.size();
    kernel_evaluations_ = n > 1 ? n * (n - 1) / 2 : 0;
    use_dense_ = cfg_.mode == SolverConfig::Mode::Dense ||
                 (cfg_.mode == SolverConfig::Mode::Auto && n <= cfg_.direct_max);
    const auto t1 = Clock::now();
    if (use_dense_ && n > 0) lu_.compute(matrix_);
    assembly_seconds_ = std::chrono::duration<double>(t1 - t0).count();
    factorization_seconds_ = std::chrono::duration<double>(Clock::now() - t1).count();
  }

  const std::vector<Scatterer>& scatterers() const { return rods_; }
  WaveNumber wavenumber() const { return k_; }
  std::size_t dropped() const { return rods_.size() - active_.size(); }
  std::size_t kernel_evaluations() const { return kernel_evaluations_; }
  const ComplexMatrix& matrix() const { return matrix_; }
  bool dense() const { return use_dense_; }
  double assembly_seconds() const { return assembly_seconds_; }
  double factorization_seconds() const { return factorization_seconds_; }

  /// Amplitudes driven by arbitrary per-rod values (one per scatterer).
  ClusterSolution solve(std::span<const Complex> driving) const {
    if (driving.size() != rods_.size())
      throw DomainError("driving vector length does not match the rod count");
    ClusterSolution out;
    out.scatterers = rods_;
    out.k = k_.value();
    out.amplitudes.assign(rods_.size(), Complex(0.0));
    out.dropped = dropped();
    out.method = use_dense_ ? "dense" : "gmres";
    const auto n = static_cast<Eigen::Index>(active_.size());
    if (n == 0) return out;

    EigenVector b(n);
    for (Eigen::Index a = 0; a < n; ++a) b(a) = driving[active_[static_cast<std::size_t>(a)]];
    for (Eigen::Index a = 0; a < n; ++a)
      if (!std::isfinite(b(a).real()) || !std::isfinite(b(a).imag()))
        throw NumericalError("non-finite driving value");
    const double bnorm = b.norm();
    if (bnorm == 0.0) return out;

    EigenVector s;
    if (use_dense_) {
      s = lu_.solve(b);
      EigenVector r = b - matrix_ * s;
      out.relative_residual = r.norm() / bnorm;
      if (out.relative_residual > cfg_.rtol) {  // one step of iterative refinement
        s += lu_.solve(r);
        out.relative_residual = (b - matrix_ * s).norm() / bnorm;
      }
      if (!(out.relative_residual <= cfg_.rtol))
        throw NumericalError("multiple-scattering system is singular to working precision",
                             out.relative_residual, 0);
    } else {
      auto g = gmres(matrix_, b, cfg_.rtol, cfg_.restart, cfg_.max_iterations);
      out.relative_residual = g.relative_residual;
      out.iterations = g.iterations;
      if (!g.converged)
        throw NumericalError("GMRES did not reach the residual tolerance", g.relative_residual,
                             g.iterations);
      s = std::move(g.x);
    }
    for (Eigen::Index a = 0; a < n; ++a) out.amplitudes[active_[static_cast<std::size_t>(a)]] = s(a);
    return out;
  }

 private:
  std::vector<Scatterer> rods_;
  WaveNumber k_;
  SolverConfig cfg_;
  std::vector<std::size_t> active_;
  std::vector<Complex> t_;
  ComplexMatrix matrix_;
  Eigen::PartialPivLU<ComplexMatrix> lu_;
  bool use_dense_ = true;
  std::size_t kernel_evaluations_ = 0;
  double assembly_seconds_ = 0.0;
  double factorization_seconds_ = 0.0;
};

inline ComplexVector incident_values(std::span<const Scatterer> rods, const IncidentField& inc,
                                     WaveNumber k) {
  ComplexVector u(rods.size());
  for (std::size_t q = 0; q < rods.size(); ++q) u[q] = inc(k, rods[q].position);
  return u;
}

/// Solves (diag(1/t) - h) s = u_inc for all rods as one system.
inline ClusterSolution solve_direct(std::vector<Scatterer> rods, const IncidentField& incident,
                                    WaveNumber k, const SolverConfig& cfg = {}) {
  const ComplexVector u = incident_values(rods, incident, k);
  FoldyLaxOperator op(std::move(rods), k, cfg);
  return op.solve(u);
}

/// sum_q s_q H0(k |x - x_q|).
inline Complex scattered_field_direct(const ClusterSolution& solution, Point x) {
  const double kv = solution.k;
  Complex sum = 0.0;
  for (std::size_t q = 0; q < solution.scatterers.size(); ++q) {
    if (solution.amplitudes[q] == Complex(0.0)) continue;
    const double r = distance(x, solution.scatterers[q].position);
    if (r == 0.0) throw DomainError("field evaluated at a rod center");
    sum += solution.amplitudes[q] * special::hankel1(0, kv * r);
  }
  return sum;
}

inline ComplexVector scattered_field_direct(const ClusterSolution& solution,
                                            std::span<const Point> points) {
  for (const auto& p : points)
    for (std::size_t q = 0; q < solution.scatterers.size(); ++q)
      if (solution.amplitudes[q] != Complex(0.0) && p == solution.scatterers[q].position)
        throw DomainError("field evaluated at a rod center");
  ComplexVector out(points.size());
  const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = scattered_field_direct(solution, points[static_cast<std::size_t>(i)]);
  return out;
}

inline Complex total_field(const ClusterSolution& solution, const IncidentField& incident,
                           Point x) {
  return incident(WaveNumber(solution.k), x) + scattered_field_direct(solution, x);
}

/// Far-field amplitude of the rod sum: sum_q s_q exp(-i k d.x_q).
inline Complex far_field_amplitude(const ClusterSolution& solution, Point direction) {
  Complex sum = 0.0;
  for (std::size_t q = 0; q < solution.scatterers.size(); ++q)
    sum += solution.amplitudes[q] *
           std::polar(1.0, -solution.k * dot(direction, solution.scatterers[q].position));
  return sum;
}

}  // namespace fastmono
