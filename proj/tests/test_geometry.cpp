#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "pfgm/error.hpp"
#include "pfgm/geometry.hpp"

using namespace pfgm;

TEST_CASE("sphere areas match closed forms") {
  const double pi = std::numbers::pi;
  CHECK(surface_area_unit_sphere(1) == doctest::Approx(2.0 * pi).epsilon(1e-14));
  CHECK(surface_area_unit_sphere(2) == doctest::Approx(4.0 * pi).epsilon(1e-14));
  CHECK(surface_area_unit_sphere(3) == doctest::Approx(2.0 * pi * pi).epsilon(1e-14));
  CHECK(surface_area_unit_sphere(4) == doctest::Approx(8.0 * pi * pi / 3.0).epsilon(1e-14));
}

TEST_CASE("sphere areas satisfy the two-step recurrence") {
  for (int n = 3; n <= 60; ++n) {
    const double lhs = surface_area_unit_sphere(n);
    const double rhs = 2.0 * std::numbers::pi / (n - 1) * surface_area_unit_sphere(n - 2);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * rhs);
  }
}

TEST_CASE("sphere areas agree with nested quadrature") {
  for (int n = 1; n <= 12; ++n) {
    const double q = oracle::sphere_area_by_quadrature(n);
    CHECK(std::abs(surface_area_unit_sphere(n) - q) <= 1e-10 * q);
  }
}

TEST_CASE("sphere area rejects n < 1") { CHECK_THROWS_AS(surface_area_unit_sphere(0), DomainError); }

TEST_CASE("Green's gradient matches finite differences of the potential") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(4));
    Vec x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = rng.uniform(-2.0, 2.0);
      y[i] = rng.uniform(-2.0, 2.0);
    }
    if ((x - y).norm() < 0.2) x += Vec::Constant(n, 0.5);
    const double h = 1e-5 * (x - y).norm();
    const Vec fd = oracle::fd_gradient([&](const Vec& p) { return greens_potential(p, y, n); }, x, h);
    const Vec g = greens_gradient(x, y, n);
    CHECK((fd - g).norm() <= 1e-6 * g.norm());
  }
}

TEST_CASE("Green's gradient carries unit flux through any sphere") {
  for (int n = 3; n <= 7; ++n) {
    const Vec y = Vec::Zero(n);
    for (double radius : {0.3, 1.0, 7.0}) {
      Vec x = Vec::Zero(n);
      x[0] = radius;
      const double flux = greens_gradient(x, y, n).norm() * surface_area_unit_sphere(n - 1) * std::pow(radius, n - 1);
      CHECK(flux == doctest::Approx(1.0).epsilon(1e-13));
    }
  }
}

TEST_CASE("Green's potential is harmonic away from the pole") {
  const int n = 4;
  Vec y = Vec::Zero(n), x(n);
  x << 0.7, -0.3, 0.2, 0.5;
  const double h = 1e-3;
  double lap = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec a = x, b = x;
    a[i] += h;
    b[i] -= h;
    lap += (greens_potential(a, y, n) - 2.0 * greens_potential(x, y, n) + greens_potential(b, y, n)) / (h * h);
  }
  CHECK(std::abs(lap) < 1e-5 * greens_potential(x, y, n));
}

TEST_CASE("Green's kernel errors") {
  Vec a = Vec::Zero(3), b = Vec::Zero(2);
  CHECK_THROWS_AS(greens_potential(a, a, 3), SingularityError);
  CHECK_THROWS_AS(greens_potential(b, b, 2), DomainError);
  CHECK_THROWS_AS(greens_gradient(a, b, 3), DimensionError);
}

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a(5, 1), b(5, 1), c(5, 2);
  for (int i = 0; i < 10; ++i) CHECK(a.uniform() == b.uniform());
  Rng d(5, 1);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += d.uniform() == c.uniform();
  CHECK(same == 0);
  const Rng parent(9);
  Rng s1 = parent.split(3), s2 = parent.split(3), s3 = parent.split(4);
  CHECK(s1.normal() == s2.normal());
  CHECK(s1.normal() != s3.normal());
}

TEST_CASE("uniform sphere directions have unit norm and zero mean") {
  Rng rng(3);
  const int n = 4, count = 20000;
  Vec sum = Vec::Zero(n + 1);
  Vec sq = Vec::Zero(n + 1);
  for (int i = 0; i < count; ++i) {
    const Vec u = sample_unit_sphere(n, rng);
    CHECK(std::abs(u.norm() - 1.0) < 1e-14);
    sum += u;
    sq += u.cwiseAbs2();
  }
  // Each coordinate has variance 1/(n+1).
  CHECK((sum / count).cwiseAbs().maxCoeff() < 4.0 * std::sqrt(1.0 / (n + 1) / count));
  CHECK(((sq / count).array() - 1.0 / (n + 1)).abs().maxCoeff() < 0.01);
}

TEST_CASE("gaussian draws have the requested scale") {
  Rng rng(8);
  double s = 0.0, s2 = 0.0;
  const int count = 50000;
  for (int i = 0; i < count; ++i) {
    const double v = sample_gaussian(1, 2.5, rng)[0];
    s += v;
    s2 += v * v;
  }
  CHECK(std::abs(s / count) < 0.05);
  CHECK(std::sqrt(s2 / count) == doctest::Approx(2.5).epsilon(0.02));
  CHECK_THROWS_AS(sample_gaussian(2, 0.0, rng), DomainError);
}

TEST_CASE("Green's potential values and homogeneity") {
  Vec y = Vec::Zero(3), x = Vec::Zero(3);
  x[0] = 1.0;
  CHECK(greens_potential(x, y, 3) == doctest::Approx(1.0 / (4.0 * std::numbers::pi)).epsilon(1e-14));
  x[0] = 2.0;
  CHECK(greens_potential(x, y, 3) == doctest::Approx(1.0 / (8.0 * std::numbers::pi)).epsilon(1e-14));
  const Vec g = greens_gradient(x, y, 3);
  CHECK(g[0] == doctest::Approx(-1.0 / (16.0 * std::numbers::pi)).epsilon(1e-14));
  CHECK(g[1] == 0.0);
  for (int n = 3; n <= 6; ++n) {
    Vec a = Vec::Zero(n), b = Vec::Zero(n);
    a[1] = 0.7;
    b[1] = 1.4;
    CHECK(greens_potential(b, Vec::Zero(n), n) ==
          doctest::Approx(greens_potential(a, Vec::Zero(n), n) / std::pow(2.0, n - 2)).epsilon(1e-14));
  }
}

TEST_CASE("Green's gradient points toward the source and matches h = 1e-5 differences") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(4));
    const Vec y = sample_gaussian(n, 1.0, rng);
    Vec u = sample_unit_sphere(n - 1, rng);
    const Vec x = y + u;  // unit distance
    const Vec g = greens_gradient(x, y, n);
    CHECK(g.dot(x - y) < 0.0);
    for (int i = 0; i < n; ++i) {
      Vec a = x, b = x;
      a[i] += 1e-5;
      b[i] -= 1e-5;
      const double fd = (greens_potential(a, y, n) - greens_potential(b, y, n)) / 2e-5;
      CHECK(std::abs(fd - g[i]) <= 1e-6 * g.norm());
    }
  }
}

TEST_CASE("sphere sampler statistics at 1e5 draws") {
  Rng rng(22);
  const int n = 2, count = 100000;
  Vec sum = Vec::Zero(n + 1), sq = Vec::Zero(n + 1);
  double worst = 0.0;
  for (int i = 0; i < count; ++i) {
    const Vec u = sample_unit_sphere(n, rng);
    worst = std::max(worst, std::abs(u.norm() - 1.0));
    sum += u;
    sq += u.cwiseAbs2();
  }
  CHECK(worst < 1e-12);
  CHECK((sum / count).cwiseAbs().maxCoeff() < 3.0 / std::sqrt(double(count)));
  for (int i = 0; i <= n; ++i) CHECK(sq[i] / count == doctest::Approx(1.0 / (n + 1)).epsilon(0.05));
}

TEST_CASE("gaussian sampler statistics at 1e5 draws") {
  Rng rng(23);
  const int count = 100000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < count; ++i) {
    const double v = sample_gaussian(1, 0.01, rng)[0];
    s += v;
    s2 += v * v;
  }
  const double mean = s / count;
  CHECK(std::abs(mean) < 3.0 * 0.01 / std::sqrt(double(count)));
  CHECK(std::sqrt(s2 / count - mean * mean) == doctest::Approx(0.01).epsilon(0.02));
}
