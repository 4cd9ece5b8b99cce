#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "pfgm/dataset.hpp"
#include "pfgm/field.hpp"
#include "pfgm/model.hpp"

namespace pfgm {

enum class Solver { euler, rk45 };

Solver parse_solver(std::string_view name);
std::string_view to_string(Solver s);

struct OdeConfig {
  double z_min = 1e-3;
  double z_max = 40.0;
  Solver solver = Solver::rk45;
  int euler_steps = 100;
  double rk45_atol = 1e-4;
  double rk45_rtol = 1e-4;
  // Replace a learned v_z by its reconstruction below this z. Models with an
  // exact v_z are never substituted.
  double z_sub_threshold = 0.1;
  double gamma = 5.0;
  double v_z_floor = 1e-8;
  std::size_t max_steps = 100000;
  std::size_t record_every = 1;  // keep every k-th accepted step
  bool record = true;

  void validate() const;
};

struct TrajectoryPoint {
  double t = 0.0;  // t' = log z
  Vec x;
  double z = 0.0;
  double norm_x = 0.0;
};

enum class RunStatus { ok, degenerate_field, singular, non_finite, step_budget };
std::string_view to_string(RunStatus s);

struct OdeRun {
  std::vector<TrajectoryPoint> trajectory;
  long nfe = 0;
  AugmentedPoint terminal;
  RunStatus status = RunStatus::ok;
  std::string message;
  long accepted_steps = 0;
  long rejected_steps = 0;
  long substitution_skips = 0;

  bool ok() const { return status == RunStatus::ok; }
};

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4) with adaptive steps, for dy/dt = f(t, y) from t0 to t1
// (either direction).

struct Rk45Options {
  double atol = 1e-6;
  double rtol = 1e-6;
  std::size_t max_steps = 100000;
  double initial_step = 0.0;  // 0: automatic
  // Optional cap on |h| given the current state.
  std::function<double(double t, const Vec& y)> max_step;
  // Called after every accepted step; returning false stops the integration.
  std::function<bool(double t_prev, const Vec& y_prev, double t, const Vec& y)> on_step;
};

struct Rk45Result {
  double t = 0.0;
  Vec y;
  long evaluations = 0;
  long accepted = 0;
  long rejected = 0;
  bool reached_end = false;  // false if stopped by on_step or the step budget
  bool stopped = false;      // on_step asked to stop
};

Rk45Result integrate_rk45(const std::function<Vec(double, const Vec&)>& f, double t0, double t1, Vec y0,
                          const Rk45Options& opts);

// ---------------------------------------------------------------------------
// Anchored Poisson-flow ODE, parameterized by t' = log z.

struct DriftOptions {
  double v_z_floor = 1e-8;
  double z_sub_threshold = 0.0;
  double gamma = 0.0;
};

// Reconstruct v_z from the data-space part of a learned v:
//   |E_x| = gamma r / (1 - r),  r = |v_x| / sqrt(N),
//   v_z  = -sqrt(N) z / (sqrt(|E_x|^2 + z^2) + gamma).
// Leaves v unchanged (and sets *applied = false) when |v_x| >= sqrt(N).
Vec substitute_z_direction(const Vec& v, double z, double gamma, int n, bool* applied = nullptr);

// (dx/dt', dz/dt') = (v_x z / v_z, z).
Vec drift(const AugmentedPoint& q, const FieldModel& model, const DriftOptions& opts = {});

// Backward: from (x0, z_max) down to z_min. Forward: from (x, z_min) up to z_max.
OdeRun integrate_backward(const Vec& x0, const FieldModel& model, const OdeConfig& cfg);
OdeRun integrate_forward(const Vec& x, const FieldModel& model, const OdeConfig& cfg);

// General anchored integration between two heights.
OdeRun integrate_anchored(const Vec& x0, double z_from, double z_to, const FieldModel& model, const OdeConfig& cfg);

// Trajectory dump: t',x_1..x_N,z,norm_x
std::string trajectory_csv(const OdeRun& run);

// ---------------------------------------------------------------------------
// Test particles released on a far sphere and following -E of discrete
// positive charges until they come within eps_hit of one.

struct HitOptions {
  double atol = 1e-7;
  double rtol = 1e-7;
  std::size_t step_budget = 100000;
};

struct HitResult {
  std::vector<std::size_t> hits;  // per charge
  std::size_t lost = 0;
  std::size_t count = 0;
  long evaluations = 0;

  std::vector<double> frequencies() const;
};

HitResult hit_particles(const Dataset& charges, std::size_t count, double r_start, double eps_hit, Rng& rng,
                        const HitOptions& opts = {});

}  // namespace pfgm
