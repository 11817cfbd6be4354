#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "fastmono/errors.hpp"

namespace fastmono {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

inline constexpr double kPi = std::numbers::pi;

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Point&, const Point&) = default;
};

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline double distance(Point a, Point b) { return norm(a - b); }

inline Point rotate(Point p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

/// Free-space wavenumber k = 2*pi/lambda, always strictly positive.
class WaveNumber {
 public:
  explicit WaveNumber(double k) : k_(k) {
    if (!(k > 0.0) || !std::isfinite(k)) throw DomainError("wavenumber must be finite and > 0");
  }
  static WaveNumber from_wavelength(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
      throw DomainError("wavelength must be finite and > 0");
    return WaveNumber(2.0 * kPi / lambda);
  }
  double value() const { return k_; }
  double wavelength() const { return 2.0 * kPi / k_; }

 private:
  double k_;
};

/// Relative max-norm difference max|a-b| / max|b|; zero when both vanish.
inline double relative_max_error(const ComplexVector& a, const ComplexVector& reference) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - reference[i]));
    den = std::max(den, std::abs(reference[i]));
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : INFINITY;
  return num / den;
}

/// ||a-b||_2 / ||b||_2; zero when both vanish.
inline double relative_l2_error(const ComplexVector& a, const ComplexVector& reference) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - reference[i]);
    den += std::norm(reference[i]);
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : INFINITY;
  return std::sqrt(num / den);
}

/// Mean of |a-b| normalized by max|b|.
inline double relative_mean_error(const ComplexVector& a, const ComplexVector& reference) {
  if (a.empty()) return 0.0;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::abs(a[i] - reference[i]);
    den = std::max(den, std::abs(reference[i]));
  }
  num /= static_cast<double>(a.size());
  if (den == 0.0) return num == 0.0 ? 0.0 : INFINITY;
  return num / den;
}

}  // namespace fastmono
