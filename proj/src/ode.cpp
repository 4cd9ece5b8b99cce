#include "pfgm/ode.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>

#include "pfgm/error.hpp"

namespace pfgm {

Solver parse_solver(std::string_view name) {
  if (name == "euler") return Solver::euler;
  if (name == "rk45") return Solver::rk45;
  throw DomainError("unknown solver '" + std::string(name) + "' (expected euler or rk45)");
}

std::string_view to_string(Solver s) { return s == Solver::euler ? "euler" : "rk45"; }

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::ok: return "ok";
    case RunStatus::degenerate_field: return "degenerate_field";
    case RunStatus::singular: return "singular";
    case RunStatus::non_finite: return "non_finite";
    case RunStatus::step_budget: return "step_budget";
  }
  return "unknown";
}

void OdeConfig::validate() const {
  if (!(z_min > 0.0) || !(z_max > z_min)) throw DomainError("ode: need 0 < z_min < z_max");
  if (euler_steps < 1) throw DomainError("ode: euler_steps must be >= 1");
  if (!(rk45_atol > 0.0) || !(rk45_rtol > 0.0)) throw DomainError("ode: tolerances must be positive");
  if (z_sub_threshold < 0.0 || gamma < 0.0 || v_z_floor < 0.0) throw DomainError("ode: negative parameter");
  if (record_every == 0) throw DomainError("ode: record_every must be >= 1");
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4)

namespace {

namespace dp {
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
}  // namespace dp

double error_norm(const Vec& err, const Vec& y0, const Vec& y1, double atol, double rtol) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = err[i] / sc;
    s += r * r;
  }
  return std::sqrt(s / static_cast<double>(std::max<Eigen::Index>(1, err.size())));
}

}  // namespace

Rk45Result integrate_rk45(const std::function<Vec(double, const Vec&)>& f, double t0, double t1, Vec y0,
                          const Rk45Options& opts) {
  Rk45Result res;
  res.t = t0;
  res.y = std::move(y0);
  if (t1 == t0) {
    res.reached_end = true;
    return res;
  }
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  auto eval = [&](double t, const Vec& y) {
    ++res.evaluations;
    return f(t, y);
  };
  auto cap = [&](double t, const Vec& y, double h) {
    if (opts.max_step) h = std::min(h, opts.max_step(t, y));
    return std::min(h, std::abs(t1 - t));
  };

  Vec k1 = eval(res.t, res.y);
  double h = opts.initial_step;
  if (!(h > 0.0)) {
    const Vec scale = (opts.atol + opts.rtol * res.y.cwiseAbs().array()).matrix();
    const double d0 = std::sqrt(res.y.cwiseQuotient(scale).squaredNorm() / static_cast<double>(res.y.size()));
    const double d1 = std::sqrt(k1.cwiseQuotient(scale).squaredNorm() / static_cast<double>(res.y.size()));
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    const Vec y1 = res.y + dir * h0 * k1;
    const Vec f1 = eval(res.t + dir * h0, y1);
    const double d2 = std::sqrt((f1 - k1).cwiseQuotient(scale).squaredNorm() / static_cast<double>(res.y.size())) / h0;
    const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(d1, d2), 0.2);
    h = std::min(100.0 * h0, h1);
  }

  using namespace dp;
  std::size_t steps = 0;
  while (true) {
    if (steps++ >= opts.max_steps) return res;
    h = cap(res.t, res.y, h);
    if (!(h > 0.0)) {
      res.reached_end = true;
      return res;
    }
    const double hs = dir * h;
    const double t = res.t;
    const Vec& y = res.y;
    const Vec k2 = eval(t + c2 * hs, y + hs * (a21 * k1));
    const Vec k3 = eval(t + c3 * hs, y + hs * (a31 * k1 + a32 * k2));
    const Vec k4 = eval(t + c4 * hs, y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vec k5 = eval(t + c5 * hs, y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vec k6 = eval(t + hs, y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    Vec y_new = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const bool last = std::abs(t1 - t) <= h * (1.0 + 1e-12);
    const double t_new = last ? t1 : t + hs;
    const Vec k7 = eval(t_new, y_new);
    const Vec err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double en = error_norm(err, y, y_new, opts.atol, opts.rtol);

    if (!std::isfinite(en)) {
      // Shrink hard on overflow; give up when the step is negligible.
      ++res.rejected;
      h *= 0.1;
      if (h < 1e-14 * span) return res;
      continue;
    }
    if (en <= 1.0) {
      ++res.accepted;
      const double t_prev = res.t;
      Vec y_prev = std::move(res.y);
      res.t = t_new;
      res.y = std::move(y_new);
      k1 = k7;
      if (opts.on_step && !opts.on_step(t_prev, y_prev, res.t, res.y)) {
        res.stopped = true;
        return res;
      }
      if (last) {
        res.reached_end = true;
        return res;
      }
      const double factor = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
      h *= factor;
    } else {
      ++res.rejected;
      h *= std::clamp(0.9 * std::pow(en, -0.2), 0.1, 0.9);
      if (h < 1e-14 * span) return res;
    }
  }
}

// ---------------------------------------------------------------------------
// Anchored ODE

Vec substitute_z_direction(const Vec& v, double z, double gamma, int n, bool* applied) {
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double r = v.head(n).norm() / sqrt_n;
  if (!(r < 1.0)) {
    if (applied) *applied = false;
    return v;
  }
  const double ex = gamma * r / (1.0 - r);
  Vec out = v;
  out[n] = -sqrt_n * z / (std::sqrt(ex * ex + z * z) + gamma);
  if (applied) *applied = true;
  return out;
}

namespace {

// v_x / v_z at (x, z), after any substitution.
Vec slope(const AugmentedPoint& q, const FieldModel& model, const DriftOptions& opts, long* skips) {
  const int n = model.dim();
  Vec v = model.evaluate(q);
  if (v.size() != n + 1) throw DimensionError("field model returned a vector of the wrong size");
  if (!model.exact_z() && q.z < opts.z_sub_threshold) {
    bool applied = false;
    v = substitute_z_direction(v, q.z, opts.gamma, n, &applied);
    if (!applied && skips) ++*skips;
  }
  const double vz = v[n];
  if (!(std::abs(vz) >= opts.v_z_floor)) {
    throw DegenerateFieldError("|v_z| = " + std::to_string(std::abs(vz)) + " below floor at z = " +
                               std::to_string(q.z) + ", |x| = " + std::to_string(q.x.norm()) +
                               ", |v_x| = " + std::to_string(v.head(n).norm()));
  }
  return v.head(n) / vz;
}

}  // namespace

Vec drift(const AugmentedPoint& q, const FieldModel& model, const DriftOptions& opts) {
  const Vec s = slope(q, model, opts, nullptr);
  Vec out(s.size() + 1);
  out.head(s.size()) = s * q.z;
  out[s.size()] = q.z;
  return out;
}

OdeRun integrate_anchored(const Vec& x0, double z_from, double z_to, const FieldModel& model, const OdeConfig& cfg) {
  cfg.validate();
  if (x0.size() != model.dim()) throw DimensionError("initial state dimension does not match the model");
  if (!(z_from > 0.0) || !(z_to > 0.0)) throw DomainError("anchored ODE needs positive heights");
  if (!x0.allFinite()) throw DomainError("initial state is not finite");

  const DriftOptions dopt{cfg.v_z_floor, cfg.z_sub_threshold, cfg.gamma};
  const double t_from = std::log(z_from);
  const double t_to = std::log(z_to);
  OdeRun run;
  std::size_t accepted = 0;
  auto record = [&](double t, const Vec& x, bool force) {
    if (!cfg.record) return;
    if (force || accepted % cfg.record_every == 0) run.trajectory.push_back({t, x, std::exp(t), x.norm()});
  };
  record(t_from, x0, true);
  Vec x = x0;
  double t_last = t_from;

  auto finish = [&](RunStatus status, std::string message) {
    run.status = status;
    run.message = std::move(message);
    if (cfg.record && (run.trajectory.empty() || run.trajectory.back().t != t_last)) record(t_last, x, true);
    run.terminal = {x, status == RunStatus::ok ? z_to : std::exp(t_last)};
    return run;
  };

  try {
    if (cfg.solver == Solver::euler) {
      const double dt = (t_to - t_from) / cfg.euler_steps;
      for (int i = 0; i < cfg.euler_steps; ++i) {
        const double t_i = t_from + i * dt;
        const double t_next = i + 1 == cfg.euler_steps ? t_to : t_from + (i + 1) * dt;
        const double z_i = std::exp(t_i);
        ++run.nfe;
        const Vec s = slope({x, z_i}, model, dopt, &run.substitution_skips);
        x += s * (std::exp(t_next) - z_i);
        t_last = t_next;
        ++accepted;
        ++run.accepted_steps;
        if (!x.allFinite()) return finish(RunStatus::non_finite, "non-finite state at t' = " + std::to_string(t_next));
        record(t_next, x, i + 1 == cfg.euler_steps);
      }
      return finish(RunStatus::ok, "");
    }

    Rk45Options opts;
    opts.atol = cfg.rk45_atol;
    opts.rtol = cfg.rk45_rtol;
    opts.max_steps = cfg.max_steps;
    bool non_finite = false;
    opts.on_step = [&](double, const Vec&, double t, const Vec& y) {
      if (!y.allFinite()) {
        non_finite = true;
        return false;
      }
      ++accepted;
      x = y;
      t_last = t;
      record(t, y, t == t_to);
      return true;
    };
    const auto f = [&](double t, const Vec& y) -> Vec {
      const double z = std::exp(t);
      return slope({y, z}, model, dopt, &run.substitution_skips) * z;
    };
    const auto res = integrate_rk45(f, t_from, t_to, x0, opts);
    run.nfe = res.evaluations;
    run.accepted_steps = res.accepted;
    run.rejected_steps = res.rejected;
    if (non_finite) return finish(RunStatus::non_finite, "non-finite state near t' = " + std::to_string(t_last));
    if (!res.reached_end) return finish(RunStatus::step_budget, "step budget or step-size underflow");
    x = res.y;
    t_last = res.t;
    return finish(RunStatus::ok, "");
  } catch (const DegenerateFieldError& e) {
    return finish(RunStatus::degenerate_field, e.what());
  } catch (const SingularityError& e) {
    return finish(RunStatus::singular, e.what());
  }
}

OdeRun integrate_backward(const Vec& x0, const FieldModel& model, const OdeConfig& cfg) {
  return integrate_anchored(x0, cfg.z_max, cfg.z_min, model, cfg);
}

OdeRun integrate_forward(const Vec& x, const FieldModel& model, const OdeConfig& cfg) {
  return integrate_anchored(x, cfg.z_min, cfg.z_max, model, cfg);
}

std::string trajectory_csv(const OdeRun& run) {
  std::string out;
  std::array<char, 32> buf{};
  auto put = [&](double v) {
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out.append(buf.data(), ptr);
  };
  if (!run.trajectory.empty()) {
    out += "t";
    for (Eigen::Index j = 0; j < run.trajectory.front().x.size(); ++j) out += ",x" + std::to_string(j + 1);
    out += ",z,norm_x\n";
  }
  for (const auto& p : run.trajectory) {
    put(p.t);
    for (Eigen::Index j = 0; j < p.x.size(); ++j) {
      out += ',';
      put(p.x[j]);
    }
    out += ',';
    put(p.z);
    out += ',';
    put(p.norm_x);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hit particles

std::vector<double> HitResult::frequencies() const {
  std::vector<double> f(hits.size());
  for (std::size_t i = 0; i < hits.size(); ++i) f[i] = static_cast<double>(hits[i]) / static_cast<double>(count);
  return f;
}

HitResult hit_particles(const Dataset& charges, std::size_t count, double r_start, double eps_hit, Rng& rng,
                        const HitOptions& hopts) {
  const int n = charges.dim();
  if (n < 3) throw DomainError("hit_particles: charges must live in R^n with n >= 3");
  if (charges.empty()) throw DomainError("hit_particles: no charges");
  if (!(eps_hit > 0.0)) throw DomainError("hit_particles: eps_hit must be positive");
  const double max_norm = stats(charges).max_norm;
  if (!(r_start > 10.0 * std::max(max_norm, eps_hit)))
    throw DomainError("hit_particles: r_start must be well outside the charges");

  auto nearest = [&](const Vec& y, std::size_t* which) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < charges.size(); ++i) {
      const double d = (y - charges.point(i)).norm();
      if (d < best) {
        best = d;
        if (which) *which = i;
      }
    }
    return best;
  };

  HitResult out;
  out.hits.assign(charges.size(), 0);
  out.count = count;
  const auto f = [&](double, const Vec& y) -> Vec {
    const Vec e = discrete_charge_field(y, charges);
    return -e / e.norm();
  };
  for (std::size_t p = 0; p < count; ++p) {
    Rng prng = rng.split(p);
    const Vec y0 = r_start * sample_unit_sphere(n - 1, prng);
    std::size_t which = 0;
    bool hit = false;
    Rk45Options opts;
    opts.atol = hopts.atol * r_start;
    opts.rtol = hopts.rtol;
    opts.max_steps = hopts.step_budget;
    opts.max_step = [&](double, const Vec& y) { return 0.25 * nearest(y, nullptr); };
    opts.on_step = [&](double, const Vec&, double, const Vec& y) {
      if (nearest(y, &which) < eps_hit) {
        hit = true;
        return false;
      }
      return y.allFinite();
    };
    try {
      const auto res = integrate_rk45(f, 0.0, 100.0 * r_start, y0, opts);
      out.evaluations += res.evaluations;
    } catch (const SingularityError& e) {
      which = e.index();
      hit = true;
    }
    if (hit)
      ++out.hits[which];
    else
      ++out.lost;
  }
  rng = rng.split(count);
  return out;
}

}  // namespace pfgm
