#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "pfgm/error.hpp"
#include "pfgm/perturb.hpp"

using namespace pfgm;

TEST_CASE("fixed exponent zero reduces to plain Gaussian radii") {
  PerturbConfig cfg;
  cfg.sigma = 0.2;
  Rng rng(1);
  Vec x(2);
  x << 0.3, -0.4;
  std::vector<double> radii, heights;
  for (int i = 0; i < 20000; ++i) {
    const auto y = perturb_with_exponent(x, 0.0, cfg, rng);
    radii.push_back((y.x - x).norm() / cfg.sigma);
    heights.push_back(y.z / cfg.sigma);
    CHECK(y.z >= 0.0);
  }
  const double crit = 1.63 / std::sqrt(20000.0);
  // |eps_x| / sigma is chi with 2 degrees of freedom; |eps_z| / sigma is half-normal.
  CHECK(oracle::ks(radii, [](double r) { return 1.0 - std::exp(-0.5 * r * r); }) < crit);
  CHECK(oracle::ks(heights, [](double h) { return std::erf(h / std::sqrt(2.0)); }) < crit);
}

TEST_CASE("mean height at fixed exponent") {
  PerturbConfig cfg;
  Rng rng(2);
  const Vec x = Vec::Zero(3);
  for (double m : {0.0, 50.0, 150.0}) {
    double s = 0.0;
    const int count = 100000;
    for (int i = 0; i < count; ++i) s += perturb_with_exponent(x, m, cfg, rng).z;
    const double expect = cfg.sigma * std::pow(1.0 + cfg.tau, m) * std::sqrt(2.0 / std::numbers::pi);
    CHECK(s / count == doctest::Approx(expect).epsilon(0.02));
  }
}

TEST_CASE("exponent is uniform on [0, M]") {
  PerturbConfig cfg;
  cfg.M = 400;
  cfg.tau = 0.05;
  Rng rng(3);
  const Vec x = Vec::Zero(2);
  double s = 0.0;
  const int count = 40000;
  for (int i = 0; i < count; ++i) s += std::log(perturb(x, cfg, rng).z);
  // E log|N(0,1)| = -(euler_gamma + ln 2) / 2.
  const double e_log_abs_normal = -0.5 * (std::numbers::egamma + std::numbers::ln2);
  const double expect = std::log(cfg.sigma) + e_log_abs_normal + 0.5 * cfg.M * std::log1p(cfg.tau);
  CHECK(s / count == doctest::Approx(expect).epsilon(0.01));
}

TEST_CASE("capped exponent bounds small-eps draws") {
  PerturbConfig cfg;
  cfg.M = 300;
  cfg.small_eps_z_threshold = 1.0;  // every draw qualifies
  cfg.capped_M = 10;
  Rng rng(4);
  const Vec x = Vec::Zero(2);
  for (int i = 0; i < 2000; ++i) CHECK(perturb(x, cfg, rng).z <= std::pow(1.0 + cfg.tau, 10) * 1.0 + 1e-15);
}

TEST_CASE("perturbation is reproducible") {
  PerturbConfig cfg;
  cfg.M = 100;
  Rng a(5), b(5);
  const Vec x = Vec::Ones(4);
  for (int i = 0; i < 10; ++i) {
    const auto ya = perturb(x, cfg, a);
    const auto yb = perturb(x, cfg, b);
    CHECK(ya.joined() == yb.joined());
  }
}

TEST_CASE("rule of thumb follows its formula") {
  auto oracle_M = [](double e, int n, double s, double t) {
    return static_cast<int>(std::ceil(0.75 * std::log(e / (2.0 * std::sqrt(double(n)) * s * s)) / std::log(1.0 + t)));
  };
  for (double e : {0.5, 10.0, 900.0, 1e5})
    for (int n : {2, 64, 3072})
      for (double s : {0.01, 0.05}) {
        const int want = std::max(1, oracle_M(e, n, s, 0.03));
        CHECK(rule_of_thumb_M(e, n, s, 0.03) == want);
      }
  // Monotone in E|x|^2, decreasing in sigma.
  int prev = 0;
  for (double e = 1.0; e < 1e6; e *= 3.0) {
    const int m = rule_of_thumb_M(e, 16, 0.01, 0.03);
    CHECK(m >= prev);
    prev = m;
  }
  CHECK(rule_of_thumb_M(100.0, 2, 0.01, 0.03) > rule_of_thumb_M(100.0, 2, 0.1, 0.03));
  CHECK(rule_of_thumb_M(1e-9, 2, 1.0, 0.03) == 1);
  CHECK_THROWS_AS(rule_of_thumb_M(0.0, 2, 0.01, 0.03), DomainError);
}

TEST_CASE("rule of thumb schedule") {
  const auto s = rule_of_thumb_schedule(1.0, 4, 0.01, 0.03, 100);
  const double g = std::pow(1.03, 100);
  CHECK(s.z_max == doctest::Approx(std::sqrt(2.0 / std::numbers::pi) * 0.01 * g).epsilon(1e-14));
  CHECK(s.norm_clip == doctest::Approx(2.0 * 0.01 * g).epsilon(1e-14));
  CHECK(s.z_min == 1e-3);
}

TEST_CASE("perturb config validation") {
  PerturbConfig c;
  c.M = 0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c.M = 1;
  c.sigma = -1.0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c.sigma = 0.01;
  c.gamma = -1.0;
  CHECK_THROWS_AS(c.validate(), DomainError);
}

TEST_CASE("the exponent only rescales the noise") {
  PerturbConfig cfg;
  Vec x(3);
  x << 1.0, -2.0, 0.5;
  for (double m : {0.0, 17.5, 291.0}) {
    Rng a(51), b(51);
    const auto base = perturb_with_exponent(x, 0.0, cfg, a);
    const auto scaled = perturb_with_exponent(x, m, cfg, b);
    const double g = std::pow(1.0 + cfg.tau, m);
    CHECK((scaled.x - x).norm() == doctest::Approx(g * (base.x - x).norm()).epsilon(1e-13));
    CHECK(scaled.z == doctest::Approx(g * base.z).epsilon(1e-13));
  }
  // m = 0: |y - x| and z are the raw noise magnitudes.
  Rng a(52), b(52);
  const auto y = perturb_with_exponent(x, 0.0, cfg, a);
  const Vec eps_x = sample_gaussian(3, cfg.sigma, b);
  const double eps_z = cfg.sigma * b.normal();
  CHECK((y.x - x).norm() == doctest::Approx(eps_x.norm()).epsilon(1e-14));
  CHECK(y.z == doctest::Approx(std::abs(eps_z)).epsilon(1e-14));
}

TEST_CASE("image-scale perturbation radius") {
  PerturbConfig cfg;
  cfg.M = 291;
  Rng rng(53);
  const Vec x = Vec::Zero(3072);
  double s = 0.0;
  const int count = 200;
  for (int i = 0; i < count; ++i) s += (perturb_with_exponent(x, 291.0, cfg, rng).x - x).norm();
  CHECK(s / count == doctest::Approx(std::sqrt(3072.0) * 0.01 * std::pow(1.03, 291)).epsilon(0.01));
  CHECK(s / count == doctest::Approx(3014.0).epsilon(0.01));
}

TEST_CASE("schedule values at image scale") {
  const auto s = rule_of_thumb_schedule(900.0, 3072, 0.01, 0.03, 291);
  CHECK(s.z_max == doctest::Approx(43.4).epsilon(0.005));
  CHECK(s.norm_clip == doctest::Approx(3014.0).epsilon(0.005));
  for (int M : {1, 50, 400})
    for (double sigma : {0.01, 0.3}) {
      const auto t = rule_of_thumb_schedule(1.0, 7, sigma, 0.05, M);
      CHECK(t.z_max / t.norm_clip == doctest::Approx(std::sqrt(2.0 / std::numbers::pi) / std::sqrt(7.0)).epsilon(1e-14));
    }
  // Disk: an independent arithmetic path for the closed form.
  const double ratio = 0.5 / (2.0 * std::sqrt(2.0) * 1e-4);
  const double m = 3.0 * std::log10(ratio) / (4.0 * std::log10(1.03));
  CHECK(rule_of_thumb_M(0.5, 2, 0.01, 0.03) == static_cast<int>(std::ceil(m)));
  CHECK(rule_of_thumb_M(900.0, 3072, 0.02, 0.03) < rule_of_thumb_M(900.0, 3072, 0.01, 0.03));
}
