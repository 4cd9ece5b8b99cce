#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "pfgm/error.hpp"
#include "pfgm/stats.hpp"
#include "pfgm/verify.hpp"

using namespace pfgm;

TEST_CASE("hemisphere polar law matches quadrature of its density") {
  for (int n : {2, 3, 5}) {
    // cos(polar angle) of a uniform direction on the upper sphere of R^(n+1) has density ∝ (1 - c^2)^((n-2)/2).
    auto dens = [n](double c) { return std::pow(1.0 - c * c, 0.5 * (n - 2)); };
    const double total = oracle::simpson(dens, 0.0, 1.0 - 1e-12, 200000);
    for (double c : {0.1, 0.5, 0.9}) {
      const double want = oracle::simpson(dens, 0.0, c, 20000) / total;
      CHECK(hemisphere_polar_cdf(c, n) == doctest::Approx(want).epsilon(1e-4));
    }
  }
  CHECK(hemisphere_polar_cdf(-0.1, 2) == 0.0);
  CHECK(hemisphere_polar_cdf(1.5, 2) == 1.0);
}

TEST_CASE("hemisphere azimuth law") {
  CHECK(hemisphere_azimuth_cdf(std::numbers::pi, 2) == doctest::Approx(0.5));
  for (int n : {3, 4}) {
    auto dens = [n](double a) { return std::pow(1.0 - a * a, 0.5 * (n - 3)); };
    const double total = oracle::simpson(dens, -1.0 + 1e-12, 1.0 - 1e-12, 200000);
    for (double a : {-0.6, 0.0, 0.3}) {
      const double want = oracle::simpson(dens, -1.0 + 1e-12, a, 100000) / total;
      CHECK(hemisphere_azimuth_cdf(a, n) == doctest::Approx(want).epsilon(1e-4));
    }
  }
}

TEST_CASE("hemisphere laws agree with sampled directions") {
  Rng rng(1);
  std::vector<double> polar, az;
  for (int i = 0; i < 20000; ++i) {
    Vec u = sample_unit_sphere(3, rng);
    polar.push_back(std::abs(u[3]));
    az.push_back(u[0] / u.head(3).norm());
  }
  const double crit = ks_critical_value(20000);
  CHECK(oracle::ks(polar, [](double c) { return hemisphere_polar_cdf(c, 3); }) < crit);
  CHECK(oracle::ks(az, [](double a) { return hemisphere_azimuth_cdf(a, 3); }) < crit);
}

TEST_CASE("kappa examples and zones") {
  const double k = kappa(3000.0, 900.0, 3072);
  CHECK(k == doctest::Approx(2.0 * 9e6 / (std::sqrt(3072.0) * 900.0)));
  CHECK(k == doctest::Approx(361.0).epsilon(1e-3));
  CHECK(kappa_zone(k) == KappaZone::far);
  const double y = std::sqrt(std::sqrt(3072.0) * 900.0 / 2.0);
  CHECK(kappa(y, 900.0, 3072) == doctest::Approx(1.0));
  CHECK(kappa_zone(1.0) == KappaZone::intermediate);

  Rng rng(2);
  const auto s = stats(generate_toy(ToyName::disk, 2000, rng));
  // |y| = max_norm / 10 on the unit disk: kappa = 2 * 0.01 / (sqrt(2) * 0.5).
  const double k_disk = kappa(s.max_norm / 10.0, s.mean_sq_norm, 2);
  CHECK(k_disk == doctest::Approx(0.02 / (std::sqrt(2.0) * 0.5)).epsilon(0.02));
  CHECK(kappa_zone(k_disk) == KappaZone::intermediate);
  CHECK(kappa_zone(kappa(s.max_norm / 100.0, s.mean_sq_norm, 2)) == KappaZone::near);
  for (double scale : {1e-3, 7.0, 1e4})
    CHECK(kappa(scale * 2.0, scale * scale * 3.0, 5) == doctest::Approx(kappa(2.0, 3.0, 5)).epsilon(1e-14));
  CHECK(to_string(KappaZone::near) == "near");
}

TEST_CASE("a single point source passes the forward uniformity test") {
  const Dataset d(Mat::Zero(1, 2));
  Rng rng(3);
  const auto rep = theorem1_uniformity(d, 100.0, 2000, rng);
  CHECK(rep.pass);
  CHECK(rep.samples_used == 2000);
  CHECK(rep.threshold == doctest::Approx(ks_critical_value(2000)));
}

TEST_CASE("forward uniformity on a small disk") {
  Rng rng(4);
  const Dataset d = generate_toy(ToyName::disk, 100, rng);
  Theorem1Options o;
  o.atol = o.rtol = 1e-7;
  const auto rep = theorem1_uniformity(d, 1000.0, 1000, rng, o);
  CHECK(rep.pass);
  CHECK_THROWS_AS(theorem1_uniformity(d, 10.0, 10, rng), DomainError);
  try {
    theorem1_uniformity(d, 10.0, 10, rng);
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("kappa") != std::string::npos);
  }
}

TEST_CASE("energy calibration is a quantile of null statistics") {
  Rng rng(5);
  const Dataset d = generate_toy(ToyName::disk, 400, rng);
  const auto cal = calibrate_energy_threshold(d, 100, 50, 0.99, rng);
  CHECK(cal.null_statistics.size() == 50);
  CHECK(cal.threshold == doctest::Approx(quantile(cal.null_statistics, 0.99)));
  CHECK_THROWS_AS(calibrate_energy_threshold(d, 300, 5, 0.99, rng), DomainError);
}

TEST_CASE("backward recovery accepts the disk and rejects the heart") {
  Rng rng(6);
  const Dataset train = generate_toy(ToyName::disk, 2000, rng);
  const Dataset disk = generate_toy(ToyName::disk, 2000, rng);
  const Dataset heart = generate_toy(ToyName::heart, 2000, rng);
  OdeConfig cfg;
  cfg.z_max = 40.0;
  cfg.record = false;
  BackwardRecoveryOptions o;
  o.energy_subset = 300;
  o.calibration_reps = 100;
  Rng a(7), b(7);
  const auto good = backward_recovery(train, disk, cfg, 300, a, o);
  CHECK(good.report.pass);
  CHECK(good.mean_nfe > 0.0);
  const auto bad = backward_recovery(train, heart, cfg, 300, b, o);
  CHECK_FALSE(bad.report.pass);
  CHECK(bad.report.statistic > good.report.statistic);
  CHECK(to_json(good.report)["name"] == "backward_recovery");
}

TEST_CASE("norm-z diagnostic on a single radial trajectory") {
  const ExactFieldModel m(Dataset(Mat::Zero(1, 2)), 0.0);
  OdeConfig cfg;
  cfg.solver = Solver::euler;
  cfg.euler_steps = 4000;  // bins interpolate |x| linearly in t'
  Vec x(2);
  x << 3.0, 4.0;
  const auto diag = norm_z_diagnostic({integrate_backward(x, m, cfg)}, 10);
  CHECK(diag.report.pass);
  std::istringstream in(diag.csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "z,mean_norm,std_norm,count");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    double z = 0, mean = 0, sd = 0;
    char c;
    std::istringstream ls(line);
    ls >> z >> c >> mean >> c >> sd;
    CHECK(sd == 0.0);
    CHECK(mean == doctest::Approx(5.0 * z / cfg.z_max).epsilon(1e-4));
  }
  CHECK(rows == 10);
}

TEST_CASE("norm-z diagnostic on disk trajectories") {
  Rng rng(8);
  const Dataset d = generate_toy(ToyName::disk, 300, rng);
  const ExactFieldModel m(d, 5.0);
  OdeConfig cfg;
  cfg.z_max = 40.0;
  const auto gen = generate_samples(m, cfg, 100, rng);
  REQUIRE(gen.runs.size() == 100);
  const auto diag = norm_z_diagnostic(gen.runs, 20);
  CHECK(diag.report.pass);
  std::istringstream in(diag.csv);
  std::string line;
  std::getline(in, line);
  double prev = 1e300;
  int rows = 0;
  while (std::getline(in, line)) {
    const double z = std::stod(line.substr(0, line.find(',')));
    CHECK(z < prev);
    prev = z;
    ++rows;
  }
  CHECK(rows == 20);
  CHECK(diag.report.details["spread_exceeds_gaussian"].get<bool>());
}

TEST_CASE("slerp blends direction and norm") {
  Vec a(2), b(2);
  a << 2.0, 0.0;
  b << 0.0, 4.0;
  CHECK((slerp_latent(a, b, 0.0) - a).norm() < 1e-15);
  CHECK((slerp_latent(a, b, 1.0) - b).norm() < 1e-14);
  const Vec mid = slerp_latent(a, b, 0.5);
  CHECK(mid.norm() == doctest::Approx(3.0));
  CHECK(mid[0] == doctest::Approx(mid[1]));
  for (double s = 0.0; s <= 1.0; s += 0.1) {
    const double r = slerp_latent(a, b, s).norm();
    CHECK(r >= 2.0 - 1e-12);
    CHECK(r <= 4.0 + 1e-12);
  }
  CHECK((slerp_latent(a, 3.0 * a, 0.5) - 2.0 * a).norm() < 1e-14);
}

TEST_CASE("interpolation endpoints reproduce the inputs") {
  Rng rng(9);
  const Dataset d = generate_toy(ToyName::disk, 300, rng);
  const ExactFieldModel m(d, 5.0);
  OdeConfig cfg;
  cfg.z_max = 40.0;
  cfg.rk45_atol = cfg.rk45_rtol = 1e-7;
  const Vec a = 0.9 * d.point(0), b = 0.9 * d.point(1);
  const auto path = interpolate(a, b, 2, m, cfg);
  REQUIRE(path.points.size() == 2);
  CHECK((path.points[0] - a).norm() < 1e-2);
  CHECK((path.points[1] - b).norm() < 1e-2);
  const auto same = interpolate(a, a, 4, m, cfg);
  for (const auto& p : same.points) CHECK((p - same.points[0]).norm() < 1e-12);
  CHECK_THROWS_AS(interpolate(a, b, 0, m, cfg), DomainError);
}

TEST_CASE("hit probability report") {
  Mat p(2, 3);
  p << -1, 0, 0, 1, 0, 0;
  Vec q(2);
  q << 1.0, 3.0;
  Rng rng(10);
  const auto rep = hit_probability_test(Dataset(p, q), 1500, 1000.0, 1e-3, 0.04, rng);
  CHECK(rep.pass);
  CHECK(rep.details["expected"][1].get<double>() == doctest::Approx(0.75));
}

TEST_CASE("tree fidelity report") {
  Rng rng(11);
  const Dataset d = generate_toy(ToyName::disk, 2000, rng);
  std::vector<AugmentedPoint> qs;
  for (int i = 0; i < 10; ++i) {
    Vec u = sample_unit_sphere(2, rng);
    u[2] = std::abs(u[2]);
    qs.push_back(AugmentedPoint::split(3.0 * u));
  }
  const auto exact = tree_fidelity_test(d, qs, 0.0, 16, 1e-12);
  CHECK(exact.pass);
  CHECK(tree_fidelity_test(d, qs, 0.5, 16, 1e-3).pass);
}
