#include <doctest.h>

#include <cmath>

#include "pfgm/error.hpp"
#include "pfgm/ode.hpp"

using namespace pfgm;

namespace {

class ConstantModel final : public FieldModel {
 public:
  ConstantModel(Vec v, bool exact) : v_(std::move(v)), exact_(exact) {}
  Vec evaluate(const AugmentedPoint&) const override { return v_; }
  int dim() const override { return static_cast<int>(v_.size()) - 1; }
  std::string kind() const override { return "constant"; }
  bool exact_z() const override { return exact_; }

 private:
  Vec v_;
  bool exact_;
};

Dataset single_source(int n) { return Dataset(Mat::Zero(1, n)); }

}  // namespace

TEST_CASE("rk45 integrates exponential decay in both directions") {
  const auto f = [](double, const Vec& y) -> Vec { return -y; };
  Rk45Options o;
  o.atol = 1e-10;
  o.rtol = 1e-10;
  Vec y0(2);
  y0 << 1.0, -2.0;
  const auto fwd = integrate_rk45(f, 0.0, 3.0, y0, o);
  CHECK(fwd.reached_end);
  CHECK(fwd.t == 3.0);
  CHECK((fwd.y - y0 * std::exp(-3.0)).norm() < 1e-9);
  const auto back = integrate_rk45(f, 3.0, 0.0, fwd.y, o);
  CHECK((back.y - y0).norm() < 1e-8);
  CHECK(fwd.evaluations == 1 + 1 + 6 * (fwd.accepted + fwd.rejected));
}

TEST_CASE("rk45 step count grows as tolerance tightens") {
  const auto f = [](double t, const Vec& y) -> Vec { return Vec::Constant(1, std::cos(t) * y[0]); };
  Rk45Options loose, tight;
  loose.atol = loose.rtol = 1e-4;
  tight.atol = tight.rtol = 1e-10;
  const Vec y0 = Vec::Ones(1);
  const auto a = integrate_rk45(f, 0.0, 10.0, y0, loose);
  const auto b = integrate_rk45(f, 0.0, 10.0, y0, tight);
  CHECK(b.accepted > a.accepted);
  CHECK(std::abs(b.y[0] - std::exp(std::sin(10.0))) < 1e-8);
  CHECK(std::abs(a.y[0] - std::exp(std::sin(10.0))) < 1e-2);
}

TEST_CASE("rk45 stops on request and on the step budget") {
  const auto f = [](double, const Vec& y) -> Vec { return y; };
  Rk45Options o;
  o.on_step = [](double, const Vec&, double t, const Vec&) { return t < 0.5; };
  const auto r = integrate_rk45(f, 0.0, 5.0, Vec::Ones(1), o);
  CHECK(r.stopped);
  CHECK_FALSE(r.reached_end);
  Rk45Options b;
  b.max_steps = 3;
  b.atol = b.rtol = 1e-12;
  CHECK_FALSE(integrate_rk45(f, 0.0, 5.0, Vec::Ones(1), b).reached_end);
}

TEST_CASE("drift formula") {
  Vec v(3);
  v << 0.3, -0.6, -1.2;
  const ConstantModel m(v, true);
  Vec x(2);
  x << 1.0, 2.0;
  const Vec d = drift({x, 0.5}, m);
  CHECK(d[0] == doctest::Approx(0.3 * 0.5 / -1.2));
  CHECK(d[1] == doctest::Approx(-0.6 * 0.5 / -1.2));
  CHECK(d[2] == 0.5);
  Vec flat = v;
  flat[2] = 0.0;
  CHECK_THROWS_AS(drift({x, 0.5}, ConstantModel(flat, true)), DegenerateFieldError);
}

TEST_CASE("z-direction substitution values") {
  const int n = 4;
  Vec v(5);
  v << 0.5, 0.0, 0.0, 0.0, 9.0;  // |v_x| = 0.5, sqrt(N) = 2, r = 0.25
  bool applied = false;
  const double gamma = 2.0, z = 0.3;
  const Vec s = substitute_z_direction(v, z, gamma, n, &applied);
  CHECK(applied);
  const double ex = gamma * 0.25 / 0.75;
  CHECK(s[4] == doctest::Approx(-2.0 * z / (std::sqrt(ex * ex + z * z) + gamma)).epsilon(1e-15));
  CHECK(s.head(4) == v.head(4));
  Vec big = v;
  big[0] = 2.5;
  CHECK(substitute_z_direction(big, z, gamma, n, &applied) == big);
  CHECK_FALSE(applied);
}

TEST_CASE("substitution recovers the exact v_z as z goes to zero") {
  Rng rng(1);
  const Dataset d = generate_toy(ToyName::disk, 200, rng);
  const double gamma = 0.5;
  Vec x(2);
  x << 1.6, 0.4;  // off the support, so E_x stays finite as z -> 0
  double prev = 1.0;
  for (double z : {1e-1, 1e-2, 1e-3}) {
    const Vec v = normalized_field({x, z}, d, gamma).v;
    const Vec s = substitute_z_direction(v, z, gamma, 2);
    const double err = std::abs(s[2] - v[2]) / std::abs(v[2]);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 1e-5);
}

TEST_CASE("a single source gives straight radial trajectories") {
  const ExactFieldModel m(single_source(2), 0.0);
  Vec x0(2);
  x0 << 3.0, -4.0;
  for (Solver s : {Solver::euler, Solver::rk45}) {
    OdeConfig cfg;
    cfg.solver = s;
    cfg.euler_steps = 7;
    cfg.z_max = 10.0;
    cfg.z_min = 1e-3;
    cfg.rk45_atol = 1e-13;
    cfg.rk45_rtol = 1e-11;
    const auto run = integrate_backward(x0, m, cfg);
    REQUIRE(run.ok());
    const Vec slope = x0 / cfg.z_max;
    CHECK((run.terminal.x - slope * cfg.z_min).norm() < 1e-9 * slope.norm() * cfg.z_min);
    CHECK(run.terminal.z == cfg.z_min);
    for (const auto& p : run.trajectory) CHECK((p.x / p.z - slope).norm() < 1e-9 * slope.norm());
  }
}

TEST_CASE("euler converges to the adaptive solution at first order") {
  Rng rng(2);
  const Dataset d = generate_toy(ToyName::disk, 300, rng);
  const ExactFieldModel m(d, 5.0);
  Vec x0(2);
  x0 << 6.0, 3.0;
  OdeConfig ref;
  ref.z_max = 20.0;
  ref.z_min = 0.05;
  ref.rk45_atol = ref.rk45_rtol = 1e-11;
  ref.record = false;
  const auto truth = integrate_backward(x0, m, ref);
  REQUIRE(truth.ok());
  auto euler_error = [&](int steps) {
    OdeConfig c = ref;
    c.solver = Solver::euler;
    c.euler_steps = steps;
    const auto r = integrate_backward(x0, m, c);
    return (r.terminal.x - truth.terminal.x).norm();
  };
  const double coarse = euler_error(20), fine = euler_error(2000);
  CHECK(coarse / fine >= 50.0);
  CHECK(euler_error(200) < coarse);
}

TEST_CASE("forward then backward returns to the start") {
  Rng rng(3);
  const Dataset d = generate_toy(ToyName::disk, 200, rng);
  const ExactFieldModel m(d, 5.0);
  OdeConfig cfg;
  cfg.rk45_atol = cfg.rk45_rtol = 1e-8;
  cfg.z_max = 40.0;
  cfg.record = false;
  for (int i = 0; i < 5; ++i) {
    const Vec x = d.point(static_cast<std::size_t>(i));
    const auto f = integrate_forward(x, m, cfg);
    REQUIRE(f.ok());
    const auto b = integrate_backward(f.terminal.x, m, cfg);
    REQUIRE(b.ok());
    CHECK((b.terminal.x - x).norm() < 1e-4);
    CHECK(f.nfe > 0);
  }
}

TEST_CASE("degenerate fields end the run with a status") {
  Vec v(3);
  v << 1.0, 0.0, 0.0;
  const ConstantModel m(v, true);
  OdeConfig cfg;
  const auto run = integrate_backward(Vec::Zero(2), m, cfg);
  CHECK(run.status == RunStatus::degenerate_field);
  CHECK_FALSE(run.message.empty());
}

TEST_CASE("learned v_z is substituted only below the threshold") {
  Vec v(3);
  v << 0.1, 0.0, -1.0;
  const ConstantModel learned(v, false);
  DriftOptions o;
  o.z_sub_threshold = 0.1;
  o.gamma = 1.0;
  const Vec above = drift({Vec::Zero(2), 0.5}, learned, o);
  const Vec below = drift({Vec::Zero(2), 0.05}, learned, o);
  CHECK(above[0] == doctest::Approx(0.1 * 0.5 / -1.0));
  const double vz = substitute_z_direction(v, 0.05, 1.0, 2)[2];
  CHECK(below[0] == doctest::Approx(0.1 * 0.05 / vz));
  const ConstantModel exact(v, true);
  CHECK(drift({Vec::Zero(2), 0.05}, exact, o)[0] == doctest::Approx(0.1 * 0.05 / -1.0));
}

TEST_CASE("trajectory csv and recording") {
  const ExactFieldModel m(single_source(2), 0.0);
  OdeConfig cfg;
  cfg.solver = Solver::euler;
  cfg.euler_steps = 10;
  cfg.record_every = 3;
  const auto run = integrate_backward(Vec::Ones(2), m, cfg);
  // start, steps 3, 6, 9, and the forced final point
  CHECK(run.trajectory.size() == 5);
  const std::string csv = trajectory_csv(run);
  CHECK(csv.rfind("t,x1,x2,z,norm_x\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  CHECK(run.nfe == 10);
}

TEST_CASE("ode config validation and parsing") {
  OdeConfig c;
  c.z_min = 50.0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  CHECK(parse_solver("euler") == Solver::euler);
  CHECK(parse_solver(to_string(Solver::rk45)) == Solver::rk45);
  CHECK_THROWS_AS(parse_solver("rk4"), DomainError);
}

TEST_CASE("hit particles land on the only charge") {
  const Dataset c(Mat::Zero(1, 3));
  Rng rng(4);
  const auto res = hit_particles(c, 50, 100.0, 1e-3, rng);
  CHECK(res.hits[0] == 50);
  CHECK(res.lost == 0);
  CHECK(res.frequencies()[0] == 1.0);
}

TEST_CASE("symmetric charges split particles evenly") {
  Mat p(2, 3);
  p << -1, 0, 0, 1, 0, 0;
  const Dataset c(p);
  Rng rng(5);
  const auto res = hit_particles(c, 2000, 1000.0, 1e-3, rng);
  CHECK(res.lost == 0);
  CHECK(std::abs(res.frequencies()[0] - 0.5) < 3.0 * std::sqrt(0.25 / 2000));
  CHECK_THROWS_AS(hit_particles(Dataset(Mat::Zero(1, 2)), 1, 100.0, 1e-3, rng), DomainError);
  CHECK_THROWS_AS(hit_particles(c, 1, 5.0, 1e-3, rng), DomainError);
}

TEST_CASE("exact-field drift equals the data-space part of the empirical field") {
  Rng rng(91);
  const Dataset d = generate_toy(ToyName::disk, 300, rng);
  const ExactFieldModel m(d, 5.0);
  for (int k = 0; k < 20; ++k) {
    Vec x(2);
    x << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0);
    const AugmentedPoint q{x, std::exp(rng.uniform(-4.0, 3.0))};
    const Vec e = empirical_field(q, d);
    const Vec dr = drift(q, m);
    CHECK((dr.head(2) - e.head(2)).norm() <= 1e-12 * (1.0 + e.head(2).norm()));
    CHECK(dr[2] == q.z);
  }
}
