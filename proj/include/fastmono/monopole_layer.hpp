#pragma once

// Discrete single-layer representation of an exterior field:
// u(x) ~ sum_p sigma_p H0(k |x - y_p|), with the y_p on an enclosing curve and
// sigma fitted in the least-squares sense to field samples at the curve points.
//
// Two collocation kernels are offered. Point uses I_mp = H0(k |y'_m - y_p|)
// directly. Quadrature reads sigma_p as (L/P) sigma(y_p) for a density sigma
// that is the trigonometric interpolant of the node values, and integrates the
// logarithmic singularity of the layer at each sample with a product rule
// (Kress). Away from the curve both coincide; on it only Quadrature is a
// consistent discretization of the single-layer potential.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fastmono/errors.hpp"
#include "fastmono/foldy_lax.hpp"
#include "fastmono/geometry.hpp"
#include "fastmono/linear_algebra.hpp"
#include "fastmono/special_functions.hpp"
#include "fastmono/types.hpp"

namespace fastmono {

enum class LayerKernel { Quadrature, Point };

inline std::string to_string(LayerKernel k) {
  return k == LayerKernel::Quadrature ? "quadrature" : "point";
}

struct MonopoleLayer {
  BoundaryCurve curve;
  LayerKernel kernel = LayerKernel::Quadrature;
  std::vector<double> arc_positions;  // arc length of each monopole from sample 0
  std::vector<Point> points;
  ComplexVector weights;
  double k = 1.0;

  std::size_t size() const { return points.size(); }
};

struct FitReport {
  double residual_norm = 0.0;
  double relative_residual = 0.0;
  double condition_estimate = 1.0;
  double dft_tail_ratio = 0.0;
  std::size_t chosen_P = 0;
  std::size_t M = 0;
  double check_error = -1.0;     // layer vs field at check points (observation rule only)
  bool ill_conditioned = false;  // condition estimate above 1e12 (possible interior resonance)
  bool converged = true;         // selection thresholds met
};

inline constexpr double kIllConditioned = 1e12;

/// u_s at every curve sample. All rods must lie strictly inside the (analytic) curve.
inline ComplexVector boundary_values(const ClusterSolution& solution, const BoundaryCurve& curve) {
  for (std::size_t q = 0; q < solution.scatterers.size(); ++q)
    if (!curve.inside_shape(solution.scatterers[q].position))
      throw GeometryError("enclosure violation: rod " + std::to_string(q) +
                          " is not strictly inside the curve");
  return scattered_field_direct(solution, curve.samples());
}

/// M x N matrix of H0(k |y'_m - x_q|); boundary_values() == H * s.
inline ComplexMatrix boundary_matrix(std::span<const Scatterer> rods, const BoundaryCurve& curve,
                                     WaveNumber k) {
  for (std::size_t q = 0; q < rods.size(); ++q)
    if (!curve.inside_shape(rods[q].position))
      throw GeometryError("enclosure violation: rod " + std::to_string(q) +
                          " is not strictly inside the curve");
  const auto M = static_cast<Eigen::Index>(curve.size());
  const auto N = static_cast<Eigen::Index>(rods.size());
  ComplexMatrix H(M, N);
  const double kv = k.value();
#pragma omp parallel for schedule(static)
  for (Eigen::Index m = 0; m < M; ++m)
    for (Eigen::Index q = 0; q < N; ++q)
      H(m, q) = special::hankel1(0, kv * distance(curve.sample(static_cast<std::size_t>(m)),
                                                  rods[static_cast<std::size_t>(q)].position));
  return H;
}

/// Indices round(i * M / P), i = 0..P-1, into the M chord midpoints.
inline std::vector<std::size_t> monopole_indices(std::size_t M, std::size_t P) {
  if (P < 1) throw DomainError("at least one monopole is required");
  if (P > M) throw DomainError("more monopoles than curve samples");
  std::vector<std::size_t> idx(P);
  for (std::size_t i = 0; i < P; ++i)
    idx[i] = static_cast<std::size_t>(
        std::llround(static_cast<double>(i) * static_cast<double>(M) / static_cast<double>(P)));
  return idx;
}

/// Arc positions of P monopoles: the midpoint stride round(i M / P) for the
/// point kernel, exact spacing L/P from the first midpoint for quadrature.
/// Both agree when P divides M.
inline std::vector<double> monopole_arc_positions(const BoundaryCurve& curve, std::size_t P,
                                                  LayerKernel kernel) {
  const std::size_t M = curve.size();
  const double h = curve.spacing();
  std::vector<double> s(P);
  if (kernel == LayerKernel::Point) {
    const auto idx = monopole_indices(M, P);
    for (std::size_t i = 0; i < P; ++i) s[i] = (static_cast<double>(idx[i]) + 0.5) * h;
  } else {
    if (P < 1) throw DomainError("at least one monopole is required");
    if (P > M) throw DomainError("more monopoles than curve samples");
    for (std::size_t i = 0; i < P; ++i)
      s[i] = 0.5 * h + curve.length() * static_cast<double>(i) / static_cast<double>(P);
  }
  return s;
}

inline std::vector<Point> monopole_points(const BoundaryCurve& curve, std::span<const double> arcs,
                                          LayerKernel kernel) {
  if (kernel == LayerKernel::Point) {
    std::vector<Point> pts;
    const double h = curve.spacing();
    for (double v : arcs) pts.push_back(curve.midpoint(static_cast<std::size_t>(std::llround(v / h - 0.5))));
    return pts;
  }
  bool on_midpoints = true;
  const double h = curve.spacing();
  for (double v : arcs) {
    const double m = v / h - 0.5;
    if (std::fabs(m - std::round(m)) > 1e-9) on_midpoints = false;
  }
  if (!on_midpoints) return curve.points_at_arc_lengths(arcs);
  std::vector<Point> pts;
  for (double v : arcs) pts.push_back(curve.midpoint(static_cast<std::size_t>(std::llround(v / h - 0.5))));
  return pts;
}

/// The P midpoints at indices round(i * M / P).
inline std::vector<Point> select_monopole_points(const BoundaryCurve& curve, std::size_t P) {
  std::vector<Point> pts;
  for (auto m : monopole_indices(curve.size(), P)) pts.push_back(curve.midpoint(m));
  return pts;
}

/// M x P collocation matrix I_mp = H0(k |y'_m - y_p|).
inline ComplexMatrix layer_matrix(std::span<const Point> samples, std::span<const Point> points,
                                  WaveNumber k) {
  const auto M = static_cast<Eigen::Index>(samples.size());
  const auto P = static_cast<Eigen::Index>(points.size());
  for (const auto& s : samples)
    for (const auto& p : points)
      if (s == p) throw DomainError("collocation point coincides with a monopole");
  ComplexMatrix I(M, P);
  const double kv = k.value();
#pragma omp parallel for schedule(static)
  for (Eigen::Index m = 0; m < M; ++m)
    for (Eigen::Index p = 0; p < P; ++p)
      I(m, p) = special::hankel1(0, kv * distance(samples[static_cast<std::size_t>(m)],
                                                  points[static_cast<std::size_t>(p)]));
  return I;
}

/// Fourier moments G_mn = integral over the curve of exp(i n t) H0(k |y'_m - y(t)|) ds,
/// t = 2 pi s / L, for |n| <= max_frequency. The logarithmic part is
/// integrated with Kress weights on a grid of Q = r M points, so every sample
/// is a grid node.
class LayerQuadrature {
 public:
  LayerQuadrature(const BoundaryCurve& curve, WaveNumber k, std::size_t max_frequency)
      : length_(curve.length()), M_(curve.size()), N_(max_frequency) {
    const std::size_t need = std::max<std::size_t>(8 * (N_ + 1), 128);
    std::size_t r = std::max<std::size_t>(1, (need + M_ - 1) / M_);
    if ((r * M_) % 2 == 1) ++r;
    const std::size_t Q = r * M_;
    Q_ = Q;
    const BoundaryCurve fine_curve = r == 1 ? curve : curve.resampled(Q);
    const auto fine = fine_curve.samples();

    const double dq = static_cast<double>(Q);
    std::vector<double> cosine(Q), weight(Q, 0.0), log_term(Q, 0.0);
    for (std::size_t i = 0; i < Q; ++i) cosine[i] = std::cos(2.0 * kPi * static_cast<double>(i) / dq);
    for (std::size_t d = 0; d < Q; ++d) {
      double acc = 0.0;
      for (std::size_t n = 1; n < Q / 2; ++n) acc += cosine[(n * d) % Q] / static_cast<double>(n);
      weight[d] = -4.0 * kPi / dq * acc - 4.0 * kPi / (dq * dq) * (d % 2 == 0 ? 1.0 : -1.0);
      if (d > 0) {
        const double sn = std::sin(kPi * static_cast<double>(d) / dq);
        log_term[d] = std::log(4.0 * sn * sn);
      }
    }

    const double kv = k.value();
    const double c = length_ / (2.0 * kPi);
    const Complex i_pi(0.0, 1.0 / kPi);
    const double trap = 2.0 * kPi / dq;
    const Complex diagonal =
        c * Complex(1.0, 2.0 / kPi * (std::log(0.5 * kv * c) + special::detail::kEulerGamma));

    const auto Mi = static_cast<Eigen::Index>(M_);
    const auto Qi = static_cast<Eigen::Index>(Q);
    ComplexMatrix W(Mi, Qi);
#pragma omp parallel for schedule(static)
    for (Eigen::Index m = 0; m < Mi; ++m) {
      const Point target = curve.sample(static_cast<std::size_t>(m));
      for (Eigen::Index j = 0; j < Qi; ++j) {
        const std::size_t d =
            (static_cast<std::size_t>(m) * r + Q - static_cast<std::size_t>(j)) % Q;
        if (d == 0) {
          W(m, j) = weight[0] * i_pi * c + trap * diagonal;
          continue;
        }
        const auto v = special::bessel_jy(0, kv * distance(target, fine[static_cast<std::size_t>(j)]));
        const Complex k1 = i_pi * v.j * c;
        const Complex k2 = (Complex(v.j, v.y) - i_pi * v.j * log_term[d]) * c;
        W(m, j) = weight[d] * k1 + trap * k2;
      }
    }

    // G_mn = sum_j W_mj exp(i n tau_j): an inverse FFT of each row, times Q.
    moments_.resize(Mi, static_cast<Eigen::Index>(2 * N_ + 1));
    Eigen::FFT<double> fft;
    std::vector<Complex> row(Q), spectrum(Q);
    for (Eigen::Index m = 0; m < Mi; ++m) {
      for (std::size_t j = 0; j < Q; ++j) row[j] = W(m, static_cast<Eigen::Index>(j));
      fft.inv(spectrum, row);
      for (std::size_t n = 0; n <= 2 * N_; ++n) {
        const auto f = static_cast<std::ptrdiff_t>(n) - static_cast<std::ptrdiff_t>(N_);
        const auto bin = static_cast<std::size_t>((f % static_cast<std::ptrdiff_t>(Q) +
                                                   static_cast<std::ptrdiff_t>(Q)) %
                                                  static_cast<std::ptrdiff_t>(Q));
        moments_(m, static_cast<Eigen::Index>(n)) = spectrum[bin] * dq;
      }
    }
  }

  std::size_t grid_size() const { return Q_; }
  std::size_t kernel_evaluations() const { return M_ * Q_; }
  std::size_t max_frequency() const { return N_; }

  /// M x P matrix mapping weights at arc positions s_p = s_0 + p L / P to the
  /// layer potential at the samples.
  ComplexMatrix matrix(std::span<const double> arc_positions) const {
    const std::size_t P = arc_positions.size();
    if (P == 0) throw DomainError("at least one monopole is required");
    if (P / 2 > N_) throw DomainError("quadrature moments do not cover this monopole count");
    const double spacing = length_ / static_cast<double>(P);
    for (std::size_t p = 0; p < P; ++p)
      if (std::fabs(arc_positions[p] - arc_positions[0] - spacing * static_cast<double>(p)) >
          1e-9 * length_)
        throw DomainError("quadrature kernel needs monopoles equispaced in arc length");

    // Trigonometric interpolation: frequencies |n| <= (P-1)/2, plus half of
    // +-P/2 for even P.
    const auto n_low = static_cast<std::ptrdiff_t>((P - 1) / 2);
    const bool even = P % 2 == 0;
    const auto Pi = static_cast<Eigen::Index>(P);
    ComplexMatrix E = ComplexMatrix::Zero(static_cast<Eigen::Index>(2 * N_ + 1), Pi);
    const auto N = static_cast<std::ptrdiff_t>(N_);
    for (std::size_t p = 0; p < P; ++p) {
      const double t = 2.0 * kPi * arc_positions[p] / length_;
      for (std::ptrdiff_t n = -n_low; n <= n_low; ++n)
        E(n + N, static_cast<Eigen::Index>(p)) = std::polar(1.0, -static_cast<double>(n) * t);
      if (even) {
        const auto h = static_cast<std::ptrdiff_t>(P / 2);
        E(h + N, static_cast<Eigen::Index>(p)) = 0.5 * std::polar(1.0, -static_cast<double>(h) * t);
        E(-h + N, static_cast<Eigen::Index>(p)) = 0.5 * std::polar(1.0, static_cast<double>(h) * t);
      }
    }
    return (moments_ * E) / length_;
  }

 private:
  double length_;
  std::size_t M_;
  std::size_t N_;
  std::size_t Q_ = 0;
  ComplexMatrix moments_;
};

/// max |X_f| over the top third of the frequency range (|f| > P/3) divided by
/// max |X_f| overall, X = DFT(weights). For P = 2, 3 the top band is the
/// highest |f|; P = 1 has no tail.
inline double dft_tail_ratio(std::span<const Complex> weights) {
  const std::size_t P = weights.size();
  if (P <= 1) return 0.0;
  const auto spectrum = special::dft(weights);
  const auto freq = [P](std::size_t i) {
    return i <= P / 2 ? static_cast<double>(i) : static_cast<double>(P - i);
  };
  double max_all = 0.0, max_f = 0.0;
  for (std::size_t i = 0; i < P; ++i) {
    max_all = std::max(max_all, std::abs(spectrum[i]));
    max_f = std::max(max_f, freq(i));
  }
  if (max_all == 0.0) return 0.0;
  const double cutoff = static_cast<double>(P) / 3.0;
  const bool any_above = max_f > cutoff;
  double max_tail = 0.0;
  for (std::size_t i = 0; i < P; ++i) {
    const bool in_tail = any_above ? freq(i) > cutoff : freq(i) == max_f;
    if (in_tail) max_tail = std::max(max_tail, std::abs(spectrum[i]));
  }
  return max_tail / max_all;
}

/// Least-squares fit of monopole weights on a fixed (curve, points) pair.
/// The column-equilibrated collocation matrix is factorized once
/// (Householder QR with column pivoting), so refits only cost a solve.
class LayerFitter {
 public:
  LayerFitter(BoundaryCurve curve, std::vector<double> arc_positions, WaveNumber k,
              LayerKernel kernel, const LayerQuadrature* quadrature = nullptr)
      : curve_(std::move(curve)), arcs_(std::move(arc_positions)), k_(k), kernel_(kernel) {
    if (arcs_.empty()) throw DomainError("at least one monopole is required");
    if (!(curve_.size() > arcs_.size()))
      throw DomainError("least-squares fit needs more curve samples than monopoles (M > P)");
    points_ = monopole_points(curve_, arcs_, kernel_);
    if (kernel_ == LayerKernel::Point) {
      matrix_ = layer_matrix(curve_.samples(), points_, k_);
      kernel_evaluations_ = curve_.size() * points_.size();
    } else if (quadrature != nullptr) {
      matrix_ = quadrature->matrix(arcs_);
    } else {
      const LayerQuadrature q(curve_, k_, arcs_.size() / 2 + 1);
      matrix_ = q.matrix(arcs_);
      kernel_evaluations_ = q.kernel_evaluations();
    }
    column_scale_ = matrix_.colwise().norm().cwiseInverse().transpose();
    qr_.compute(matrix_ * column_scale_.asDiagonal());
    const auto R = qr_.matrixR();
    const auto P = static_cast<Eigen::Index>(arcs_.size());
    const double r0 = std::abs(R(0, 0));
    const double rl = std::abs(R(P - 1, P - 1));
    condition_ = rl > 0.0 ? r0 / rl : INFINITY;
  }

  LayerFitter(BoundaryCurve curve, std::size_t P, WaveNumber k,
              LayerKernel kernel = LayerKernel::Quadrature)
      : LayerFitter(curve, monopole_arc_positions(curve, P, kernel), k, kernel) {}

  const BoundaryCurve& curve() const { return curve_; }
  std::span<const Point> points() const { return points_; }
  std::span<const double> arc_positions() const { return arcs_; }
  LayerKernel kernel() const { return kernel_; }
  /// Kernel evaluations spent building the collocation matrix (0 when shared).
  std::size_t kernel_evaluations() const { return kernel_evaluations_; }
  double condition_estimate() const { return condition_; }
  const ComplexMatrix& matrix() const { return matrix_; }

  std::pair<MonopoleLayer, FitReport> fit(std::span<const Complex> values) const {
    if (values.size() != curve_.size())
      throw DomainError("boundary value count does not match the curve sample count");
    const EigenVector u = Eigen::Map<const EigenVector>(values.data(),
                                                        static_cast<Eigen::Index>(values.size()));
    MonopoleLayer layer;
    layer.curve = curve_;
    layer.kernel = kernel_;
    layer.arc_positions = arcs_;
    layer.points = points_;
    layer.k = k_.value();

    FitReport report;
    report.chosen_P = points_.size();
    report.M = curve_.size();
    report.condition_estimate = condition_;
    report.ill_conditioned = condition_ > kIllConditioned;

    const double unorm = u.norm();
    if (unorm == 0.0) {
      layer.weights.assign(points_.size(), Complex(0.0));
      return {std::move(layer), report};
    }
    const EigenVector z = qr_.solve(u);
    const EigenVector sigma = column_scale_.asDiagonal() * z;
    report.residual_norm = (matrix_ * sigma - u).norm();
    report.relative_residual = report.residual_norm / unorm;
    layer.weights = from_eigen(sigma);
    for (const auto& w : layer.weights)
      if (!std::isfinite(w.real()) || !std::isfinite(w.imag()))
        throw NumericalError("non-finite monopole weight in least-squares fit");
    report.dft_tail_ratio = dft_tail_ratio(layer.weights);
    return {std::move(layer), report};
  }

 private:
  BoundaryCurve curve_;
  std::vector<double> arcs_;
  WaveNumber k_;
  LayerKernel kernel_;
  std::vector<Point> points_;
  ComplexMatrix matrix_;
  Eigen::VectorXd column_scale_;
  Eigen::ColPivHouseholderQR<ComplexMatrix> qr_;
  double condition_ = 1.0;
  std::size_t kernel_evaluations_ = 0;
};

/// Fits weights at the given monopole points to the sampled boundary values.
/// The points must be the quadrature nodes for their count (equispaced in arc
/// length from the first midpoint), or midpoints of the curve for the
/// point kernel.
inline std::pair<MonopoleLayer, FitReport> fit_density(const BoundaryCurve& curve,
                                                       std::span<const Point> monopole_points_in,
                                                       std::span<const Complex> values,
                                                       WaveNumber k,
                                                       LayerKernel kernel = LayerKernel::Quadrature) {
  const std::size_t P = monopole_points_in.size();
  if (P == 0) throw DomainError("at least one monopole is required");
  const double tol = 1e-9 * curve.length();
  if (kernel == LayerKernel::Quadrature) {
    auto arcs = monopole_arc_positions(curve, P, kernel);
    const auto expected = monopole_points(curve, arcs, kernel);
    for (std::size_t p = 0; p < P; ++p)
      if (distance(expected[p], monopole_points_in[p]) > tol)
        throw DomainError("monopole points are not the quadrature nodes of the curve");
    return LayerFitter(curve, std::move(arcs), k, kernel).fit(values);
  }
  std::vector<double> arcs;
  for (const auto& p : monopole_points_in) {
    std::size_t found = curve.size();
    for (std::size_t m = 0; m < curve.size(); ++m)
      if (distance(curve.midpoint(m), p) <= tol) {
        found = m;
        break;
      }
    if (found == curve.size()) throw DomainError("monopole point is not a midpoint of the curve");
    arcs.push_back((static_cast<double>(found) + 0.5) * curve.spacing());
  }
  return LayerFitter(curve, std::move(arcs), k, kernel).fit(values);
}

/// Smallest P of the grid whose fit has tail ratio <= tail_threshold and
/// relative residual <= residual_cap. Falls back to the last grid entry with
/// converged = false.
inline std::pair<std::size_t, FitReport> select_monopole_count(
    const BoundaryCurve& curve, std::span<const Complex> values, WaveNumber k,
    double tail_threshold, std::span<const std::size_t> P_grid, double residual_cap = 1e-2,
    LayerKernel kernel = LayerKernel::Quadrature) {
  if (P_grid.empty()) throw DomainError("empty monopole-count grid");
  for (std::size_t i = 0; i < P_grid.size(); ++i) {
    if (P_grid[i] < 1) throw DomainError("grid entries must be >= 1");
    if (P_grid[i] >= curve.size()) throw DomainError("every grid entry must be < M");
    if (i > 0 && P_grid[i] <= P_grid[i - 1]) throw DomainError("monopole-count grid must increase");
  }
  std::optional<LayerQuadrature> quadrature;
  if (kernel == LayerKernel::Quadrature) quadrature.emplace(curve, k, P_grid.back() / 2 + 1);
  FitReport last;
  for (const auto P : P_grid) {
    LayerFitter fitter(curve, monopole_arc_positions(curve, P, kernel), k, kernel,
                       quadrature ? &*quadrature : nullptr);
    auto [layer, report] = fitter.fit(values);
    report.converged =
        report.dft_tail_ratio <= tail_threshold && report.relative_residual <= residual_cap;
    if (report.converged) return {P, report};
    last = report;
  }
  return {P_grid.back(), last};
}

enum class SelectionRule { Spectrum, Observation };

inline std::string to_string(SelectionRule r) {
  return r == SelectionRule::Spectrum ? "spectrum" : "observation";
}

struct FitConfig {
  std::size_t P = 0;  // 0 selects P automatically
  std::size_t M = 0;  // 0 uses m_per_p * P
  SelectionRule selection = SelectionRule::Spectrum;
  double tail_threshold = 1e-2;
  double residual_cap = 1e-2;
  double check_tolerance = 3e-3;  // observation rule: relative max-norm at the check points
  std::size_t m_per_p = 10;
  std::size_t selection_m_per_p = 10;  // observation rule: M = selection_m_per_p * P while scanning
  std::size_t p_min = 3;
  std::size_t p_max = 400;
  LayerKernel kernel = LayerKernel::Quadrature;
};

struct LayerSize {
  std::size_t P = 0;
  std::size_t M = 0;
  FitReport selection;  // report of the selecting fit
};

using FieldSampler = std::function<ComplexVector(std::span<const Point>)>;

inline Complex evaluate_layer(const MonopoleLayer& layer, Point x);
inline ComplexVector evaluate_layer(const MonopoleLayer& layer, std::span<const Point> xs);

namespace detail {

inline std::size_t layer_samples(const FitConfig& cfg, std::size_t P) {
  return std::max<std::size_t>(cfg.m_per_p * P, 16);
}

/// Spectrum rule: grids p_lo..p_hi (step 1) fitted on the curve sampled at
/// m_per_p * p_hi points; p_hi doubles until a P qualifies or p_max is hit.
inline LayerSize choose_by_spectrum(const BoundaryCurve& enclosure, const FieldSampler& field,
                                    WaveNumber k, const FitConfig& cfg) {
  std::size_t lo = std::max<std::size_t>(1, cfg.p_min);
  std::size_t hi = std::min(std::max<std::size_t>(16, 2 * lo), cfg.p_max);
  while (true) {
    const BoundaryCurve sel = enclosure.resampled(layer_samples(cfg, hi));
    const ComplexVector values = field(sel.samples());
    std::vector<std::size_t> grid;
    for (std::size_t p = lo; p <= hi; ++p) grid.push_back(p);
    auto [P, report] = select_monopole_count(sel, values, k, cfg.tail_threshold, grid,
                                             cfg.residual_cap, cfg.kernel);
    if (report.converged || hi >= cfg.p_max) return {P, layer_samples(cfg, P), report};
    lo = hi + 1;
    hi = std::min(2 * hi, cfg.p_max);
  }
}

/// Observation rule: smallest P whose layer, fitted with M = selection_m_per_p * P,
/// reproduces the field at the check points to check_tolerance.
inline LayerSize choose_by_observation(const BoundaryCurve& enclosure, const FieldSampler& field,
                                       WaveNumber k, const FitConfig& cfg,
                                       std::span<const Point> check_points,
                                       std::span<const Complex> check_values) {
  if (check_points.empty()) throw ConfigError("observation rule needs check points");
  if (!check_values.empty() && check_values.size() != check_points.size())
    throw DomainError("check value count does not match the check points");
  const ComplexVector reference = check_values.empty()
                                      ? field(check_points)
                                      : ComplexVector(check_values.begin(), check_values.end());
  LayerSize last;
  for (std::size_t P = std::max<std::size_t>(1, cfg.p_min); P <= cfg.p_max; ++P) {
    const BoundaryCurve curve =
        enclosure.resampled(std::max<std::size_t>(cfg.selection_m_per_p * P, std::max<std::size_t>(P + 1, 16)));
    const ComplexVector values = field(curve.samples());
    auto [layer, report] = LayerFitter(curve, P, k, cfg.kernel).fit(values);
    const ComplexVector approx = evaluate_layer(layer, check_points);
    report.check_error = relative_max_error(approx, reference);
    report.converged = report.check_error <= cfg.check_tolerance;
    last = {P, layer_samples(cfg, P), report};
    if (report.converged) return last;
  }
  return last;
}

}  // namespace detail

/// Chooses (P, M) for an enclosure given a way to sample the exterior field.
/// check_points (and optionally the field already sampled there) are used by
/// the observation rule only and must lie outside the enclosure.
inline LayerSize choose_layer_size(const BoundaryCurve& enclosure, const FieldSampler& field,
                                   WaveNumber k, const FitConfig& cfg,
                                   std::span<const Point> check_points = {},
                                   std::span<const Complex> check_values = {}) {
  if (cfg.m_per_p < 2) throw ConfigError("m_per_p must be >= 2");
  if (cfg.selection_m_per_p < 2) throw ConfigError("selection_m_per_p must be >= 2");
  if (cfg.P > 0) {
    LayerSize out{cfg.P, cfg.M > 0 ? cfg.M : detail::layer_samples(cfg, cfg.P), {}};
    if (out.M <= out.P) throw ConfigError("M must exceed P");
    return out;
  }
  if (std::max<std::size_t>(1, cfg.p_min) > cfg.p_max) throw ConfigError("p_min exceeds p_max");
  LayerSize out = cfg.selection == SelectionRule::Spectrum
                      ? detail::choose_by_spectrum(enclosure, field, k, cfg)
                      : detail::choose_by_observation(enclosure, field, k, cfg, check_points, check_values);
  if (cfg.M > 0) out.M = cfg.M;
  if (out.M <= out.P) throw ConfigError("M must exceed P");
  return out;
}

/// sum_p sigma_p H0(k |x - y_p|).
inline Complex evaluate_layer(const MonopoleLayer& layer, Point x) {
  Complex sum = 0.0;
  const double kv = layer.k;
  for (std::size_t p = 0; p < layer.points.size(); ++p) {
    const double r = distance(x, layer.points[p]);
    if (r == 0.0) throw DomainError("layer evaluated at a monopole point");
    if (layer.weights[p] == Complex(0.0)) continue;
    sum += layer.weights[p] * special::hankel1(0, kv * r);
  }
  return sum;
}

struct LayerEvaluation {
  Complex value;
  bool degraded = false;  // inside or within one sample spacing of the curve
};

inline LayerEvaluation evaluate_layer_checked(const MonopoleLayer& layer, Point x) {
  return {evaluate_layer(layer, x), contains(layer.curve, x) != Containment::Outside};
}

inline ComplexVector evaluate_layer(const MonopoleLayer& layer, std::span<const Point> xs) {
  for (const auto& x : xs)
    for (const auto& y : layer.points)
      if (x == y) throw DomainError("layer evaluated at a monopole point");
  ComplexVector out(xs.size());
  const auto n = static_cast<std::ptrdiff_t>(xs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = evaluate_layer(layer, xs[static_cast<std::size_t>(i)]);
  return out;
}

/// F(d) = sum_p sigma_p exp(-i k d.y_p); for large |x|,
/// u(x) ~ sqrt(2/(pi k |x|)) exp(i(k|x| - pi/4)) F(x/|x|).
inline Complex far_field_amplitude(const MonopoleLayer& layer, Point direction) {
  if (std::fabs(norm(direction) - 1.0) > 1e-12) throw DomainError("direction must be a unit vector");
  Complex sum = 0.0;
  for (std::size_t p = 0; p < layer.points.size(); ++p)
    sum += layer.weights[p] * std::polar(1.0, -layer.k * dot(direction, layer.points[p]));
  return sum;
}

/// Leading-order large-distance field predicted from a far-field amplitude.
inline Complex far_field_asymptote(Complex amplitude, double k, double distance_from_origin) {
  const double kr = k * distance_from_origin;
  return std::sqrt(2.0 / (kPi * kr)) * std::polar(1.0, kr - 0.25 * kPi) * amplitude;
}

}  // namespace fastmono
