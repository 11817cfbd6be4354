#pragma once

// Closed star-shaped curves r(theta) = R (1 + (A/R) cos(n theta)) sampled
// uniformly in arc length, square-lattice rod fills and point location.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fastmono/errors.hpp"
#include "fastmono/types.hpp"

namespace fastmono {

/// Cosine-lobed polar shape. lobe_amplitude = 0 gives a circle.
struct LobedShape {
  double mean_radius = 1.0;
  double lobe_amplitude = 0.0;
  int lobes = 3;

  double radius(double theta) const {
    return mean_radius + lobe_amplitude * std::cos(lobes * theta);
  }
  double radius_derivative(double theta) const {
    return -lobe_amplitude * lobes * std::sin(lobes * theta);
  }
  double max_radius() const { return mean_radius + std::fabs(lobe_amplitude); }
  friend bool operator==(const LobedShape&, const LobedShape&) = default;
};

struct Scatterer {
  Point position;
  double radius = 0.0;
  double permittivity = 1.0;
};

enum class Containment { Inside, Outside, NearBoundary };

class BoundaryCurve {
 public:
  BoundaryCurve() = default;

  const LobedShape& shape() const { return shape_; }
  Point center() const { return center_; }
  double rotation() const { return rotation_; }
  std::size_t size() const { return samples_.size(); }
  std::span<const Point> samples() const { return samples_; }
  const Point& sample(std::size_t m) const { return samples_[m]; }
  /// Cumulative arc length at each sample; arc_lengths()[0] == 0.
  std::span<const double> arc_lengths() const { return arc_lengths_; }
  /// Polar parameter (curve frame) of each sample.
  std::span<const double> parameters() const { return parameters_; }
  double length() const { return length_; }
  double spacing() const { return length_ / static_cast<double>(samples_.size()); }

  /// Point on the curve at polar parameter theta (curve frame).
  Point point_at(double theta) const {
    const double r = shape_.radius(theta);
    return center_ + rotate(Point{r * std::cos(theta), r * std::sin(theta)}, rotation_);
  }

  /// Curve point halfway (in arc length) between samples m and m+1.
  const Point& midpoint(std::size_t m) const { return midpoints_[m]; }
  std::span<const Point> midpoints() const { return midpoints_; }

  /// Curve points at the given arc lengths from sample 0 (taken modulo the length).
  std::vector<Point> points_at_arc_lengths(std::span<const double> s) const;

  /// Same shape, position and orientation with a different sample count.
  BoundaryCurve resampled(std::size_t M) const;

  /// Analytic inside test on the polar shape (no sampling involved).
  bool inside_shape(Point x) const {
    const Point local = rotate(x - center_, -rotation_);
    const double rho = norm(local);
    if (rho == 0.0) return true;
    return rho < shape_.radius(std::atan2(local.y, local.x));
  }

 private:
  friend BoundaryCurve make_trefoil(double, double, int, Point, double, std::size_t);
  friend BoundaryCurve homothety(const BoundaryCurve&, double);

  LobedShape shape_;
  Point center_;
  double rotation_ = 0.0;
  std::vector<Point> samples_;
  std::vector<Point> midpoints_;
  std::vector<double> arc_lengths_;
  std::vector<double> parameters_;
  double length_ = 0.0;
};

namespace detail {

// 5-point Gauss-Legendre nodes/weights on [-1, 1].
inline constexpr double kGaussNodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                          0.5384693101056831, 0.9061798459386640};
inline constexpr double kGaussWeights[5] = {0.2369268850561891, 0.4786286704993665,
                                            0.5688888888888889, 0.4786286704993665,
                                            0.2369268850561891};

inline double curve_speed(const LobedShape& shape, double t) {
  const double r = shape.radius(t), dr = shape.radius_derivative(t);
  return std::sqrt(r * r + dr * dr);
}

inline double arc_between(const LobedShape& shape, double a, double b) {
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  double sum = 0.0;
  for (int i = 0; i < 5; ++i)
    sum += kGaussWeights[i] * curve_speed(shape, mid + half * kGaussNodes[i]);
  return half * sum;
}

/// Arc length s(theta) tabulated on a dense theta grid, inverted by Newton
/// steps started from linear interpolation.
class ArcLengthMap {
 public:
  ArcLengthMap(const LobedShape& shape, std::size_t cells)
      : shape_(shape), step_(2.0 * kPi / static_cast<double>(cells)), cumulative_(cells + 1, 0.0) {
    for (std::size_t i = 1; i <= cells; ++i)
      cumulative_[i] = cumulative_[i - 1] + arc_between(shape_, static_cast<double>(i - 1) * step_,
                                                        static_cast<double>(i) * step_);
  }

  double length() const { return cumulative_.back(); }

  /// theta in [0, 2 pi) with s(theta) = target, target taken modulo the length.
  double theta(double target) const {
    const double L = length();
    target = std::fmod(target, L);
    if (target < 0.0) target += L;
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    const auto cell = static_cast<std::size_t>(
        std::clamp<std::ptrdiff_t>(it - cumulative_.begin() - 1, 0,
                                   static_cast<std::ptrdiff_t>(cumulative_.size()) - 2));
    const double t0 = static_cast<double>(cell) * step_;
    const double span = cumulative_[cell + 1] - cumulative_[cell];
    double th = t0 + (span > 0.0 ? (target - cumulative_[cell]) / span : 0.0) * step_;
    for (int iter = 0; iter < 4; ++iter) {
      const double s = cumulative_[cell] + arc_between(shape_, t0, th);
      th -= (s - target) / curve_speed(shape_, th);
    }
    return th;
  }

 private:
  LobedShape shape_;
  double step_;
  std::vector<double> cumulative_;
};

}  // namespace detail

/// Lobed closed curve sampled at M arc-length-uniform points, starting at
/// theta = 0 in the curve frame and running counter-clockwise. The arc-length
/// midpoints between consecutive samples are kept as well.
inline BoundaryCurve make_trefoil(double mean_radius, double lobe_amplitude, int lobes,
                                  Point center, double rotation, std::size_t M) {
  if (!(mean_radius > 0.0) || !std::isfinite(mean_radius))
    throw GeometryError("mean radius must be finite and > 0");
  if (lobe_amplitude < 0.0 || !std::isfinite(lobe_amplitude))
    throw GeometryError("lobe amplitude must be finite and >= 0");
  if (lobe_amplitude >= mean_radius)
    throw GeometryError("lobe amplitude >= mean radius: curve self-intersects");
  if (lobes < 1) throw GeometryError("lobe count must be >= 1");
  if (M < 16) throw GeometryError("a curve needs at least 16 samples");

  BoundaryCurve c;
  c.shape_ = {mean_radius, lobe_amplitude, lobes};
  c.center_ = center;
  c.rotation_ = rotation;

  const detail::ArcLengthMap map(c.shape_, 32 * M);
  c.length_ = map.length();
  c.samples_.resize(M);
  c.midpoints_.resize(M);
  c.arc_lengths_.resize(M);
  c.parameters_.resize(M);
  const double h = c.length_ / static_cast<double>(M);
  for (std::size_t m = 0; m < M; ++m) {
    const double target = h * static_cast<double>(m);
    const double theta = m == 0 ? 0.0 : map.theta(target);
    c.parameters_[m] = theta;
    c.arc_lengths_[m] = target;
    c.samples_[m] = c.point_at(theta);
    c.midpoints_[m] = c.point_at(map.theta(target + 0.5 * h));
  }
  return c;
}

inline std::vector<Point> BoundaryCurve::points_at_arc_lengths(std::span<const double> s) const {
  const detail::ArcLengthMap map(shape_, 32 * std::max<std::size_t>(samples_.size(), s.size()));
  const double scale = length_ / map.length();
  std::vector<Point> out;
  out.reserve(s.size());
  for (double v : s) out.push_back(point_at(map.theta(v / scale)));
  return out;
}

inline BoundaryCurve make_circle(double radius, Point center, std::size_t M) {
  return make_trefoil(radius, 0.0, 1, center, 0.0, M);
}

/// Scale a curve about its center. Samples are scaled directly, not resampled.
inline BoundaryCurve homothety(const BoundaryCurve& curve, double ratio) {
  if (!(ratio > 0.0) || !std::isfinite(ratio)) throw GeometryError("homothety ratio must be > 0");
  BoundaryCurve c = curve;
  c.shape_.mean_radius *= ratio;
  c.shape_.lobe_amplitude *= ratio;
  c.length_ *= ratio;
  for (auto& s : c.arc_lengths_) s *= ratio;
  for (auto& p : c.samples_) p = c.center_ + ratio * (p - c.center_);
  for (auto& p : c.midpoints_) p = c.center_ + ratio * (p - c.center_);
  return c;
}

inline BoundaryCurve BoundaryCurve::resampled(std::size_t M) const {
  return make_trefoil(shape_.mean_radius, shape_.lobe_amplitude, shape_.lobes, center_, rotation_,
                      M);
}

namespace detail {

inline double segment_distance(Point p, Point a, Point b) {
  const Point ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + t * ab);
}

inline double polygon_distance(std::span<const Point> poly, Point p) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < poly.size(); ++i)
    best = std::min(best, segment_distance(p, poly[i], poly[(i + 1) % poly.size()]));
  return best;
}

/// Winding number of a closed polygon around p.
inline int winding_number(std::span<const Point> poly, Point p) {
  int wn = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point a = poly[i], b = poly[(i + 1) % poly.size()];
    const double cross = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
    if (a.y <= p.y) {
      if (b.y > p.y && cross > 0.0) ++wn;
    } else if (b.y <= p.y && cross < 0.0) {
      --wn;
    }
  }
  return wn;
}

/// Dense polygon of the analytic shape, used for margin tests.
inline std::vector<Point> dense_outline(const BoundaryCurve& curve, std::size_t n = 8192) {
  std::vector<Point> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = curve.point_at(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  return out;
}

}  // namespace detail

/// Distance from x to the sampled polygon of the curve.
inline double boundary_distance(const BoundaryCurve& curve, Point x) {
  return detail::polygon_distance(curve.samples(), x);
}

/// Winding-number location against the sampled polygon. Points closer than
/// one sample spacing to the polygon are reported as NearBoundary.
inline Containment contains(const BoundaryCurve& curve, Point x) {
  if (boundary_distance(curve, x) < curve.spacing()) return Containment::NearBoundary;
  return detail::winding_number(curve.samples(), x) != 0 ? Containment::Inside
                                                         : Containment::Outside;
}

/// Square lattice (pitch, anchored at the curve center) clipped to the
/// interior with a margin of pitch/2, then thinned by removing
/// round(hole_fraction * count) rods chosen by a seeded shuffle. Output keeps
/// lattice order (rows bottom to top, left to right).
inline std::vector<Scatterer> fill_with_rods(const BoundaryCurve& curve, double lattice_pitch,
                                             double rod_radius, double permittivity,
                                             double hole_fraction, std::uint64_t seed) {
  if (!(rod_radius > 0.0)) throw GeometryError("rod radius must be > 0");
  if (!(lattice_pitch > 2.0 * rod_radius))
    throw GeometryError("lattice pitch must exceed the rod diameter");
  if (!(permittivity >= 1.0) || !std::isfinite(permittivity))
    throw ConfigError("permittivity must be real and >= 1");
  if (!(hole_fraction >= 0.0 && hole_fraction < 1.0))
    throw ConfigError("hole fraction must lie in [0, 1)");

  const auto outline = detail::dense_outline(curve);
  const double margin = 0.5 * lattice_pitch;
  const int extent = static_cast<int>(std::ceil(curve.shape().max_radius() / lattice_pitch)) + 1;
  const Point c = curve.center();

  std::vector<Scatterer> lattice;
  for (int j = -extent; j <= extent; ++j) {
    for (int i = -extent; i <= extent; ++i) {
      const Point p = c + Point{i * lattice_pitch, j * lattice_pitch};
      if (!curve.inside_shape(p)) continue;
      if (detail::polygon_distance(outline, p) < margin) continue;
      lattice.push_back({p, rod_radius, permittivity});
    }
  }
  if (lattice.empty()) throw GeometryError("degenerate scenario: no lattice site inside the curve");

  const auto n = lattice.size();
  const auto holes = static_cast<std::size_t>(std::llround(hole_fraction * static_cast<double>(n)));
  if (holes >= n) throw GeometryError("degenerate scenario: every rod removed");

  // Partial Fisher-Yates on indices, raw engine output only so the selection
  // does not depend on the standard library's distribution implementations.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 engine(seed);
  std::vector<char> removed(n, 0);
  for (std::size_t i = 0; i < holes; ++i) {
    const std::size_t pick = i + static_cast<std::size_t>(engine() % (n - i));
    std::swap(order[i], order[pick]);
    removed[order[i]] = 1;
  }
  std::vector<Scatterer> rods;
  rods.reserve(n - holes);
  for (std::size_t i = 0; i < n; ++i)
    if (!removed[i]) rods.push_back(lattice[i]);
  return rods;
}

/// Radius, permittivity and pairwise non-overlap checks.
inline void validate_scatterers(std::span<const Scatterer> rods) {
  for (const auto& r : rods) {
    if (!(r.radius > 0.0) || !std::isfinite(r.radius)) throw GeometryError("rod radius must be > 0");
    if (!(r.permittivity >= 1.0) || !std::isfinite(r.permittivity))
      throw ConfigError("rod permittivity must be real and >= 1");
    if (!std::isfinite(r.position.x) || !std::isfinite(r.position.y))
      throw GeometryError("rod position must be finite");
  }
  for (std::size_t i = 0; i < rods.size(); ++i)
    for (std::size_t j = i + 1; j < rods.size(); ++j)
      if (distance(rods[i].position, rods[j].position) <= rods[i].radius + rods[j].radius)
        throw GeometryError("rods " + std::to_string(i) + " and " + std::to_string(j) +
                            " overlap");
}

struct Cluster {
  std::vector<Scatterer> scatterers;
  BoundaryCurve enclosure;
};

/// Every rod disk must sit inside the enclosure with at least one radius of
/// clearance from the sampled boundary.
inline void validate_cluster(const Cluster& cluster) {
  validate_scatterers(cluster.scatterers);
  for (std::size_t q = 0; q < cluster.scatterers.size(); ++q) {
    const auto& r = cluster.scatterers[q];
    if (detail::winding_number(cluster.enclosure.samples(), r.position) == 0 ||
        boundary_distance(cluster.enclosure, r.position) < 2.0 * r.radius)
      throw GeometryError("rod " + std::to_string(q) + " is not inside its enclosure");
  }
}

}  // namespace fastmono
