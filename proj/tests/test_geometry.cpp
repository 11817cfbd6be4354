#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fastmono/geometry.hpp"

namespace {

using namespace fastmono;

// Composite Simpson on the polar arc-length element, refined until two
// successive estimates agree.
double adaptive_length(double R, double A, int n) {
  auto speed = [&](double t) {
    const double r = R + A * std::cos(n * t);
    const double dr = -A * n * std::sin(n * t);
    return std::sqrt(r * r + dr * dr);
  };
  double previous = 0.0;
  for (int cells = 64;; cells *= 2) {
    const double h = 2.0 * kPi / cells;
    double sum = speed(0.0) + speed(2.0 * kPi);
    for (int i = 1; i < cells; ++i) sum += (i % 2 ? 4.0 : 2.0) * speed(i * h);
    const double est = sum * h / 3.0;
    if (cells > 64 && std::fabs(est - previous) < 1e-13 * est) return est;
    previous = est;
  }
}

double local_radius_mismatch(const BoundaryCurve& c, Point p) {
  const Point local = rotate(p - c.center(), -c.rotation());
  return std::fabs(norm(local) - c.shape().radius(std::atan2(local.y, local.x)));
}

}  // namespace

TEST(Geometry, CircleIsDegenerateTrefoil) {
  const Point c{0.5, -1.0};
  const auto curve = make_circle(2.0, c, 64);
  ASSERT_EQ(curve.size(), 64u);
  EXPECT_NEAR(curve.length(), 4.0 * kPi, 1e-10);
  for (std::size_t m = 0; m < curve.size(); ++m) {
    EXPECT_NEAR(distance(curve.sample(m), c), 2.0, 1e-12);
    const double expected = 2.0 * kPi * static_cast<double>(m) / 64.0;
    const Point d = curve.sample(m) - c;
    double angle = std::atan2(d.y, d.x);
    if (angle < -1e-12) angle += 2.0 * kPi;
    EXPECT_NEAR(angle, expected, 1e-10);
  }
}

TEST(Geometry, ArcLengthMatchesIndependentQuadrature) {
  for (auto [R, A, n] : {std::tuple{1.3, 0.39, 3}, std::tuple{2.2, 0.66, 3}, std::tuple{1.0, 0.5, 5},
                         std::tuple{0.7, 0.0, 1}}) {
    const auto curve = make_trefoil(R, A, n, {}, 0.0, 200);
    const double ref = adaptive_length(R, A, n);
    EXPECT_LE(std::fabs(curve.length() - ref), 1e-10 * ref);
  }
}

TEST(Geometry, SamplesAreUniformInArcLength) {
  const auto curve = make_trefoil(1.3, 0.39, 3, {0.2, 0.1}, 0.4, 300);
  double lo = INFINITY, hi = 0.0;
  for (std::size_t m = 0; m < curve.size(); ++m) {
    const double chord = distance(curve.sample(m), curve.sample((m + 1) % curve.size()));
    lo = std::min(lo, chord);
    hi = std::max(hi, chord);
    EXPECT_LE(local_radius_mismatch(curve, curve.sample(m)), 1e-12);
    EXPECT_LE(local_radius_mismatch(curve, curve.midpoint(m)), 1e-12);
    EXPECT_NEAR(curve.arc_lengths()[m], curve.spacing() * static_cast<double>(m), 1e-12);
  }
  EXPECT_LE(hi / lo, 1.01);
}

TEST(Geometry, TangentTurnsSmoothly) {
  const auto curve = make_trefoil(1.3, 0.39, 3, {}, 0.0, 256);
  const std::size_t M = curve.size();
  for (std::size_t m = 0; m < M; ++m) {
    const Point a = curve.sample((m + 1) % M) - curve.sample(m);
    const Point b = curve.sample((m + 2) % M) - curve.sample((m + 1) % M);
    const double turn = std::atan2(a.x * b.y - a.y * b.x, dot(a, b));
    EXPECT_LT(std::fabs(turn), 0.2) << "m=" << m;
  }
}

TEST(Geometry, RotationEquivariance) {
  const Point c{1.0, 2.0};
  const double phi = 0.83;
  const auto base = make_trefoil(1.3, 0.39, 3, c, 0.0, 128);
  const auto turned = make_trefoil(1.3, 0.39, 3, c, phi, 128);
  EXPECT_NEAR(base.length(), turned.length(), 1e-13);
  for (std::size_t m = 0; m < base.size(); ++m) {
    const Point expected = c + rotate(base.sample(m) - c, phi);
    EXPECT_LE(distance(turned.sample(m), expected), 1e-12);
  }
}

TEST(Geometry, HomothetyScalesAboutCenter) {
  const Point c{-0.4, 0.9};
  const auto curve = make_trefoil(1.3, 0.39, 3, c, 0.3, 128);

  const auto same = homothety(curve, 1.0);
  for (std::size_t m = 0; m < curve.size(); ++m) EXPECT_EQ(same.sample(m), curve.sample(m));

  const auto big = homothety(curve, 1.3);
  EXPECT_NEAR(big.length(), 1.3 * curve.length(), 1e-12);
  EXPECT_NEAR(homothety(curve, 2.0).length(), 2.0 * curve.length(), 1e-12);
  for (std::size_t m = 0; m < curve.size(); ++m) {
    EXPECT_NEAR(distance(big.sample(m), c), 1.3 * distance(curve.sample(m), c), 1e-12);
    EXPECT_LE(local_radius_mismatch(big, big.sample(m)), 1e-12);
  }

  const auto back = homothety(big, 1.0 / 1.3);
  for (std::size_t m = 0; m < curve.size(); ++m)
    EXPECT_LE(distance(back.sample(m), curve.sample(m)), 1e-12);
  EXPECT_THROW(homothety(curve, 0.0), GeometryError);
}

TEST(Geometry, LatticeCountMatchesBruteForce) {
  const auto curve = make_circle(5.0, {}, 256);
  const auto rods = fill_with_rods(curve, 1.0, 0.1, 4.0, 0.0, 1);
  std::size_t expected = 0;
  for (int i = -6; i <= 6; ++i)
    for (int j = -6; j <= 6; ++j)
      if (std::hypot(i, j) <= 5.0 - 0.5) ++expected;
  EXPECT_EQ(rods.size(), expected);
  for (const auto& r : rods) {
    EXPECT_EQ(r.radius, 0.1);
    EXPECT_EQ(r.permittivity, 4.0);
    EXPECT_EQ(r.position.x, std::round(r.position.x));
  }
}

TEST(Geometry, HolesAreSeededAndDeterministic) {
  const auto curve = make_trefoil(1.3, 0.39, 3, {}, 0.0, 256);
  const auto full = fill_with_rods(curve, 0.095, 0.02, 12.0, 0.0, 7);
  const auto a = fill_with_rods(curve, 0.095, 0.02, 12.0, 0.1, 7);
  const auto b = fill_with_rods(curve, 0.095, 0.02, 12.0, 0.1, 7);
  const auto c = fill_with_rods(curve, 0.095, 0.02, 12.0, 0.1, 8);
  EXPECT_EQ(a.size(), full.size() - static_cast<std::size_t>(std::llround(0.1 * full.size())));
  ASSERT_EQ(a.size(), b.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].position, b[i].position);
    differs = differs || !(a[i].position == c[i].position);
  }
  EXPECT_TRUE(differs);
}

TEST(Geometry, HoleFractionCanLeaveOneRod) {
  const auto curve = make_circle(1.2, {}, 128);
  ASSERT_EQ(fill_with_rods(curve, 0.5, 0.05, 4.0, 0.0, 3).size(), 9u);
  EXPECT_EQ(fill_with_rods(curve, 0.5, 0.05, 4.0, 0.85, 3).size(), 1u);
  EXPECT_THROW(fill_with_rods(curve, 0.5, 0.05, 4.0, 0.99, 3), GeometryError);
  EXPECT_THROW(fill_with_rods(curve, 0.5, 0.05, 4.0, 1.0, 3), ConfigError);
  EXPECT_THROW(fill_with_rods(curve, 0.08, 0.05, 4.0, 0.0, 3), GeometryError);
  EXPECT_THROW(fill_with_rods(make_circle(0.2, {}, 64), 0.5, 0.05, 4.0, 0.0, 3), GeometryError);
}

TEST(Geometry, ContainsAgreesWithAnalyticTest) {
  const auto curve = make_trefoil(1.3, 0.39, 3, {0.3, -0.2}, 0.5, 256);
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> u(-2.2, 2.2);
  std::size_t near = 0;
  for (int i = 0; i < 10000; ++i) {
    const Point x{0.3 + u(gen), -0.2 + u(gen)};
    const auto where = contains(curve, x);
    if (where == Containment::NearBoundary) {
      ++near;
      EXPECT_LT(boundary_distance(curve, x), curve.spacing());
      continue;
    }
    EXPECT_EQ(where == Containment::Inside, curve.inside_shape(x)) << x.x << "," << x.y;
  }
  EXPECT_LT(near, 500u);
}

TEST(Geometry, InvalidCurvesAreRejected) {
  EXPECT_THROW(make_trefoil(1.0, 1.0, 3, {}, 0.0, 64), GeometryError);
  EXPECT_THROW(make_trefoil(1.0, 1.5, 3, {}, 0.0, 64), GeometryError);
  EXPECT_THROW(make_trefoil(-1.0, 0.0, 3, {}, 0.0, 64), GeometryError);
  EXPECT_THROW(make_trefoil(1.0, 0.2, 0, {}, 0.0, 64), GeometryError);
  EXPECT_THROW(make_trefoil(1.0, 0.2, 3, {}, 0.0, 8), GeometryError);
}

TEST(Geometry, ScattererValidation) {
  std::vector<Scatterer> overlap{{{0.0, 0.0}, 0.1, 4.0}, {{0.15, 0.0}, 0.1, 4.0}};
  EXPECT_THROW(validate_scatterers(overlap), GeometryError);
  std::vector<Scatterer> bad_eps{{{0.0, 0.0}, 0.1, 0.5}};
  EXPECT_THROW(validate_scatterers(bad_eps), ConfigError);

  Cluster cluster{{{{0.0, 0.0}, 0.05, 4.0}, {{0.95, 0.0}, 0.05, 4.0}}, make_circle(1.0, {}, 128)};
  EXPECT_THROW(validate_cluster(cluster), GeometryError);
  cluster.scatterers[1].position = {0.5, 0.0};
  EXPECT_NO_THROW(validate_cluster(cluster));
}
