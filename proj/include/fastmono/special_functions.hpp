#pragma once

// Bessel J/Y of orders 0 and 1 for real arguments, the first-kind Hankel
// function, the outgoing 2D Helmholtz Green function and a direct DFT.
//
// Below kSeriesLimit the ascending series is summed in long double; the
// largest series term near x = 14 is ~3e4, so the extra mantissa bits keep the
// cancellation error at the 1e-15 level. Above it the Hankel asymptotic
// expansion is summed until its terms stop decreasing; at x = 14 the smallest
// term is already below 1e-13 relative to the envelope sqrt(2/(pi x)).

#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fastmono/errors.hpp"
#include "fastmono/types.hpp"

namespace fastmono::special {

inline constexpr double kSeriesLimit = 14.0;
inline constexpr double kMinYArgument = 1e-300;

struct BesselValues {
  double j = 0.0;
  double y = 0.0;
};

namespace detail {

using Long = long double;
inline constexpr Long kEulerGamma = 0.577215664901532860606512090082402431L;
inline constexpr Long kPiL = 3.141592653589793238462643383279502884L;

inline void check_order(int order) {
  if (order != 0 && order != 1)
    throw DomainError("Bessel order " + std::to_string(order) + " not supported (only 0 and 1)");
}

/// Ascending series. When want_y is false only J is summed.
inline BesselValues series(int order, double xd, bool want_y) {
  const Long x = xd;
  const Long q = x * x / 4;
  const Long tiny = 1e-21L;

  if (order == 0) {
    // J0 = sum (-q)^m/(m!)^2,  Y0 = 2/pi [(ln(x/2)+gamma) J0 - sum H_m (-q)^m/(m!)^2]
    Long term = 1, j = 1, s = 0, harmonic = 0;
    for (int m = 1; m < 400; ++m) {
      term *= -q / (Long(m) * m);
      harmonic += Long(1) / m;
      j += term;
      s -= harmonic * term;
      if (std::fabs(term) * (1 + harmonic) <= tiny * (1 + std::fabs(j))) break;
    }
    BesselValues out;
    out.j = static_cast<double>(j);
    if (want_y)
      out.y = static_cast<double>(2 / kPiL * ((std::log(x / 2) + kEulerGamma) * j + s));
    return out;
  }

  // J1 = (x/2) sum (-q)^m/(m!(m+1)!)
  // Y1 = -2/(pi x) + 2/pi ln(x/2) J1 - (x/2)/pi sum [psi(m+1)+psi(m+2)] (-q)^m/(m!(m+1)!)
  Long term = 1, j = 1, psi_sum = 1 - 2 * kEulerGamma, s = psi_sum;
  for (int m = 1; m < 400; ++m) {
    term *= -q / (Long(m) * (m + 1));
    psi_sum += Long(1) / m + Long(1) / (m + 1);
    j += term;
    s += psi_sum * term;
    if (std::fabs(term) * (1 + std::fabs(psi_sum)) <= tiny * (1 + std::fabs(j))) break;
  }
  j *= x / 2;
  BesselValues out;
  out.j = static_cast<double>(j);
  if (want_y)
    out.y = static_cast<double>(-2 / (kPiL * x) + 2 / kPiL * std::log(x / 2) * j -
                                (x / 2) / kPiL * s);
  return out;
}

/// Hankel asymptotic expansion with the phase chi = x - (n/2 + 1/4) pi.
inline BesselValues asymptotic(int order, double x) {
  const double mu = 4.0 * order * order;
  double p = 0.0, q = 0.0, a = 1.0, previous = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 100; ++k) {
    if (k > 0) {
      const double odd = 2.0 * k - 1.0;
      a *= (mu - odd * odd) / (k * 8.0 * x);
    }
    const double magnitude = std::fabs(a);
    if (magnitude > previous) break;
    previous = magnitude;
    const double sign = ((k / 2) % 2 == 0) ? 1.0 : -1.0;
    if (k % 2 == 0)
      p += sign * a;
    else
      q += sign * a;
    if (magnitude < 1e-17 * std::fabs(p)) break;
  }
  // cos/sin of the shifted phase via angle addition keeps full accuracy for large x.
  const double phase = (0.5 * order + 0.25) * kPi;
  const double c = std::cos(x), s = std::sin(x);
  const double cp = std::cos(phase), sp = std::sin(phase);
  const double cos_chi = c * cp + s * sp;
  const double sin_chi = s * cp - c * sp;
  const double envelope = std::sqrt(2.0 / (kPi * x));
  return {envelope * (p * cos_chi - q * sin_chi), envelope * (p * sin_chi + q * cos_chi)};
}

inline BesselValues evaluate(int order, double x, bool want_y) {
  if (x == 0.0) return {order == 0 ? 1.0 : 0.0, -std::numeric_limits<double>::infinity()};
  return x < kSeriesLimit ? series(order, x, want_y) : asymptotic(order, x);
}

}  // namespace detail

inline double bessel_j(int order, double x) {
  detail::check_order(order);
  if (!(x >= 0.0) || !std::isfinite(x))
    throw DomainError("bessel_j requires a finite argument >= 0");
  return detail::evaluate(order, x, false).j;
}

inline double bessel_y(int order, double x) {
  detail::check_order(order);
  if (!(x >= kMinYArgument) || !std::isfinite(x))
    throw DomainError("bessel_y requires a finite argument >= 1e-300 (logarithmic singularity)");
  return detail::evaluate(order, x, true).y;
}

/// J and Y of the same order from one evaluation.
inline BesselValues bessel_jy(int order, double x) {
  detail::check_order(order);
  if (!(x >= kMinYArgument) || !std::isfinite(x))
    throw DomainError("Hankel/Neumann evaluation requires a finite argument >= 1e-300");
  return detail::evaluate(order, x, true);
}

inline Complex hankel1(int order, double x) {
  const BesselValues v = bessel_jy(order, x);
  return {v.j, v.y};
}

/// Outgoing Green function of (Laplacian + k^2) in the plane: -(i/4) H0(k r).
inline Complex green2d(WaveNumber k, double r) {
  if (!(r > 0.0)) throw DomainError("green2d is singular at r = 0");
  return Complex(0.0, -0.25) * hankel1(0, k.value() * r);
}

namespace detail {

inline std::vector<Complex> twiddles(std::size_t n, double sign) {
  std::vector<Complex> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = std::polar(1.0, sign * 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

inline std::vector<Complex> direct_transform(std::span<const Complex> in, double sign) {
  const std::size_t n = in.size();
  if (n == 0) throw DomainError("DFT of an empty sequence");
  const auto w = twiddles(n, sign);
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += in[j] * w[(k * j) % n];
    out[k] = acc;
  }
  return out;
}

}  // namespace detail

/// Unnormalized forward transform X_k = sum_n x_n exp(-2 pi i k n / P).
inline std::vector<Complex> dft(std::span<const Complex> sequence) {
  return detail::direct_transform(sequence, -1.0);
}

/// Inverse of dft(), including the 1/P factor.
inline std::vector<Complex> inverse_dft(std::span<const Complex> spectrum) {
  auto out = detail::direct_transform(spectrum, 1.0);
  const double scale = 1.0 / static_cast<double>(out.size());
  for (auto& v : out) v *= scale;
  return out;
}

}  // namespace fastmono::special
