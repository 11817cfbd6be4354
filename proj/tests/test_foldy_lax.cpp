#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fastmono/foldy_lax.hpp"

namespace {

using namespace fastmono;

// t from the C++17 special math functions, independent of the library's Bessel code.
Complex t_reference(double kr, double eps) {
  const double nu = std::sqrt(eps);
  const double j0 = std::cyl_bessel_j(0.0, kr), j1 = std::cyl_bessel_j(1.0, kr);
  const double y0 = std::cyl_neumann(0.0, kr), y1 = std::cyl_neumann(1.0, kr);
  const double i0 = std::cyl_bessel_j(0.0, nu * kr), i1 = std::cyl_bessel_j(1.0, nu * kr);
  const Complex h0(j0, y0), h1(j1, y1);
  return -(j1 * i0 - nu * j0 * i1) / (h1 * i0 - nu * h0 * i1);
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  return xs;
}

std::vector<Scatterer> random_rods(std::size_t n, double half_width, double radius, double eps,
                                   unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-half_width, half_width);
  std::vector<Scatterer> rods;
  while (rods.size() < n) {
    const Point p{u(gen), u(gen)};
    bool ok = true;
    for (const auto& r : rods) ok = ok && distance(r.position, p) > 4.0 * radius;
    if (ok) rods.push_back({p, radius, eps});
  }
  return rods;
}

std::vector<Point> ring(double radius, std::size_t n) {
  std::vector<Point> pts;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
    pts.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  return pts;
}

double max_abs(const ComplexVector& v) {
  double m = 0.0;
  for (const auto& z : v) m = std::max(m, std::abs(z));
  return m;
}

}  // namespace

TEST(RodCoefficient, VanishesForMatchedPermittivity) {
  for (double kr : {1e-3, 0.1, 1.0}) EXPECT_LT(std::abs(t_coeff(WaveNumber(1.0), kr, 1.0)), 1e-16);
}

TEST(RodCoefficient, LosslessUnitarity) {
  for (double eps : {2.0, 4.0, 12.0})
    for (double kr : log_grid(1e-3, 1.0, 100)) {
      const Complex t = t_coeff(WaveNumber(1.0), kr, eps);
      EXPECT_LT(std::fabs(std::abs(1.0 + 2.0 * t) - 1.0), 1e-10) << "eps=" << eps << " kr=" << kr;
    }
}

TEST(RodCoefficient, MatchesIndependentFormula) {
  for (double eps : {1.5, 2.0, 4.0, 12.0})
    for (double kr : log_grid(1e-3, 1.0, 40)) {
      const Complex ref = t_reference(kr, eps);
      EXPECT_LE(std::abs(t_coeff(WaveNumber(2.0), kr / 2.0, eps) - ref), 1e-10 * std::abs(ref))
          << "eps=" << eps << " kr=" << kr;
    }
}

TEST(RodCoefficient, SmallRodsScatterWeakly) {
  const double small = std::abs(t_coeff(WaveNumber(1.0), 1e-3, 12.0));
  const double larger = std::abs(t_coeff(WaveNumber(1.0), 1e-2, 12.0));
  EXPECT_LT(small, larger);
  EXPECT_LT(small, 1e-4);
}

TEST(RodCoefficient, DomainErrors) {
  EXPECT_THROW(t_coeff(WaveNumber(1.0), 0.0, 4.0), DomainError);
  EXPECT_THROW(t_coeff(WaveNumber(1.0), 0.1, 0.5), DomainError);
}

TEST(InteractionMatrix, SmallCases) {
  const WaveNumber k(2.0);
  const std::vector<Scatterer> one{{{0.0, 0.0}, 0.05, 4.0}};
  const auto h1 = assemble_interaction(one, k);
  ASSERT_EQ(h1.rows(), 1);
  EXPECT_EQ(h1(0, 0), Complex(0.0));

  const std::vector<Scatterer> two{{{0.0, 0.0}, 0.05, 4.0}, {{0.3, 0.4}, 0.05, 4.0}};
  const auto h2 = assemble_interaction(two, k);
  EXPECT_EQ(h2(0, 0), Complex(0.0));
  EXPECT_EQ(h2(0, 1), h2(1, 0));
  EXPECT_LE(std::abs(h2(0, 1) - special::hankel1(0, 1.0)), 1e-15);

  const auto five = random_rods(5, 2.0, 0.05, 4.0, 1);
  const auto h5 = assemble_interaction(five, k);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(h5(i, i), Complex(0.0));
    for (int j = 0; j < 5; ++j) {
      EXPECT_EQ(h5(i, j), h5(j, i));
      if (i != j) {
        EXPECT_LE(std::abs(h5(i, j) - special::hankel1(0, 2.0 * distance(five[i].position, five[j].position))),
                  1e-15);
      }
    }
  }
}

TEST(InteractionMatrix, CoincidentCentersRejected) {
  const std::vector<Scatterer> rods{{{1.0, 1.0}, 0.05, 4.0}, {{1.0, 1.0}, 0.05, 4.0}};
  EXPECT_THROW(assemble_interaction(rods, WaveNumber(1.0)), GeometryError);
  EXPECT_THROW(solve_direct(rods, make_plane_wave({1.0, 0.0}), WaveNumber(1.0)), GeometryError);
}

TEST(FoldyLax, SingleRodClosedForm) {
  const WaveNumber k = WaveNumber::from_wavelength(1.0);
  const std::vector<Scatterer> rods{{{0.3, -0.2}, 0.05, 12.0}};
  const auto inc = make_plane_wave({0.0, -1.0});
  const auto sol = solve_direct(rods, inc, k);
  const Complex expected = t_coeff(k, 0.05, 12.0) * inc(k, rods[0].position);
  EXPECT_LE(std::abs(sol.amplitudes[0] - expected), 1e-14 * std::abs(expected));
}

TEST(FoldyLax, TwoRodsByHand) {
  const WaveNumber k(3.0);
  const std::vector<Scatterer> rods{{{0.0, 0.0}, 0.05, 4.0}, {{0.7, 0.2}, 0.08, 12.0}};
  const auto inc = make_plane_wave({0.6, 0.8}, Complex(0.5, -1.0));
  const Complex t1 = t_coeff(k, 0.05, 4.0), t2 = t_coeff(k, 0.08, 12.0);
  const Complex h = special::hankel1(0, 3.0 * distance(rods[0].position, rods[1].position));
  const Complex u1 = inc(k, rods[0].position), u2 = inc(k, rods[1].position);
  const Complex a = 1.0 / t1, d = 1.0 / t2, b = -h;
  const Complex det = a * d - b * b;
  const Complex s1 = (d * u1 - b * u2) / det, s2 = (a * u2 - b * u1) / det;
  const auto sol = solve_direct(rods, inc, k);
  EXPECT_LE(std::abs(sol.amplitudes[0] - s1), 1e-13 * std::abs(s1));
  EXPECT_LE(std::abs(sol.amplitudes[1] - s2), 1e-13 * std::abs(s2));
}

TEST(FoldyLax, ZeroIncidentGivesZeroAmplitudes) {
  const auto rods = random_rods(20, 1.0, 0.02, 12.0, 3);
  const auto sol = solve_direct(rods, make_plane_wave({1.0, 0.0}, 0.0), WaveNumber(5.0));
  for (const auto& s : sol.amplitudes) EXPECT_EQ(s, Complex(0.0));
}

TEST(FoldyLax, SolveIsLinearInDriving) {
  const WaveNumber k(4.0);
  const auto rods = random_rods(30, 1.5, 0.03, 12.0, 4);
  const FoldyLaxOperator op(rods, k);
  const auto u1 = incident_values(rods, make_plane_wave({1.0, 0.0}), k);
  const auto u2 = incident_values(rods, make_plane_wave({0.0, 1.0}), k);
  const Complex a(0.3, 1.2), b(-2.0, 0.5);
  ComplexVector u(rods.size());
  for (std::size_t q = 0; q < u.size(); ++q) u[q] = a * u1[q] + b * u2[q];
  const auto s1 = op.solve(u1), s2 = op.solve(u2), s = op.solve(u);
  ComplexVector combo(u.size());
  for (std::size_t q = 0; q < u.size(); ++q) combo[q] = a * s1.amplitudes[q] + b * s2.amplitudes[q];
  EXPECT_LE(relative_max_error(s.amplitudes, combo), 1e-10);
}

TEST(FoldyLax, FieldIndependentOfRodOrder) {
  const WaveNumber k = WaveNumber::from_wavelength(1.0);
  auto rods = random_rods(40, 1.0, 0.02, 12.0, 5);
  const auto inc = make_plane_wave({0.0, -1.0});
  const auto pts = ring(3.0, 90);
  const auto f1 = scattered_field_direct(solve_direct(rods, inc, k), pts);
  std::mt19937 gen(9);
  std::shuffle(rods.begin(), rods.end(), gen);
  const auto f2 = scattered_field_direct(solve_direct(rods, inc, k), pts);
  EXPECT_LE(relative_max_error(f2, f1), 1e-12);
}

TEST(FoldyLax, DenseAndIterativeAgree) {
  const WaveNumber k = WaveNumber::from_wavelength(1.0);
  const auto rods = random_rods(150, 2.0, 0.02, 12.0, 6);
  const auto inc = make_plane_wave({0.6, -0.8});
  SolverConfig dense, iterative;
  dense.mode = SolverConfig::Mode::Dense;
  iterative.mode = SolverConfig::Mode::Iterative;
  const auto a = solve_direct(rods, inc, k, dense);
  const auto b = solve_direct(rods, inc, k, iterative);
  EXPECT_EQ(a.method, "dense");
  EXPECT_EQ(b.method, "gmres");
  EXPECT_GT(b.iterations, 0);
  EXPECT_LE(b.relative_residual, 1e-10);
  EXPECT_LE(relative_max_error(b.amplitudes, a.amplitudes), 1e-8);
}

TEST(FoldyLax, Reciprocity) {
  const WaveNumber k = WaveNumber::from_wavelength(1.0);
  const auto rods = random_rods(60, 1.0, 0.02, 12.0, 7);
  const FoldyLaxOperator op(rods, k);
  const Point a{-3.0, 0.5}, b{2.0, 2.5};
  auto source_at = [&](Point x) {
    ComplexVector u(rods.size());
    for (std::size_t q = 0; q < rods.size(); ++q)
      u[q] = special::hankel1(0, k.value() * distance(x, rods[q].position));
    return op.solve(u);
  };
  const Complex ab = scattered_field_direct(source_at(a), b);
  const Complex ba = scattered_field_direct(source_at(b), a);
  EXPECT_LE(std::abs(ab - ba), 1e-8 * std::abs(ab));
}

TEST(FoldyLax, RadiatesOutward) {
  const WaveNumber k = WaveNumber::from_wavelength(1.0);
  const auto sol = solve_direct(random_rods(25, 0.8, 0.02, 12.0, 8), make_plane_wave({1.0, 0.0}), k);
  const Point dir{0.6, 0.8};
  const double r1 = 1000.0, r2 = 4000.0;
  const Complex u1 = scattered_field_direct(sol, r1 * dir);
  const Complex u2 = scattered_field_direct(sol, r2 * dir);
  EXPECT_NEAR(std::abs(u1) * std::sqrt(r1), std::abs(u2) * std::sqrt(r2), 2e-3 * std::abs(u1) * std::sqrt(r1));
  const double r = 1e4;
  const Complex far = std::sqrt(2.0 / (kPi * k.value() * r)) *
                      std::polar(1.0, k.value() * r - kPi / 4) * far_field_amplitude(sol, dir);
  EXPECT_LE(std::abs(scattered_field_direct(sol, r * dir) - far), 1e-3 * std::abs(far));
}

TEST(FoldyLax, TransparentRodsAreDropped) {
  const WaveNumber k(2.0);
  std::vector<Scatterer> rods{{{0.0, 0.0}, 0.05, 1.0}, {{0.5, 0.0}, 0.05, 12.0}};
  const auto sol = solve_direct(rods, make_plane_wave({1.0, 0.0}), k);
  EXPECT_EQ(sol.dropped, 1u);
  EXPECT_EQ(sol.amplitudes[0], Complex(0.0));
  const Complex single = t_coeff(k, 0.05, 12.0) * std::polar(1.0, 1.0);
  EXPECT_LE(std::abs(sol.amplitudes[1] - single), 1e-14);
}

TEST(FoldyLax, TotalFieldAddsIncident) {
  const WaveNumber k(2.0);
  const auto inc = make_plane_wave({0.0, 1.0});
  const auto sol = solve_direct(random_rods(5, 0.5, 0.02, 4.0, 10), inc, k);
  const Point x{2.0, 1.0};
  EXPECT_EQ(total_field(sol, inc, x), inc(k, x) + scattered_field_direct(sol, x));
  EXPECT_THROW(scattered_field_direct(sol, sol.scatterers[0].position), DomainError);
  EXPECT_THROW(make_plane_wave({1.0, 1.0}), ConfigError);
  EXPECT_GT(max_abs(scattered_field_direct(sol, ring(1.0, 8))), 0.0);
}
