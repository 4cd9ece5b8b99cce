#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pfgm/dataset.hpp"
#include "pfgm/model.hpp"
#include "pfgm/ode.hpp"

namespace pfgm {

struct TestReport {
  std::string name;
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::size_t samples_used = 0;
  nlohmann::json details = nlohmann::json::object();
};

nlohmann::json to_json(const TestReport& r);

// ---------------------------------------------------------------------------
// Hemisphere laws for a uniform direction on the upper unit sphere of R^(N+1).

// CDF of cos(polar angle) = z / r, supported on [0, 1].
double hemisphere_polar_cdf(double c, int n);
// N = 2: CDF of the azimuth on [0, 2pi). N >= 3: CDF of x_1 / |x| on [-1, 1].
double hemisphere_azimuth_cdf(double a, int n);

struct Theorem1Options {
  double start_radius = 1e-4;  // emission sphere around each source
  double atol = 1e-8;
  double rtol = 1e-8;
  double threshold = 0.0;      // 0: ks_critical_value(count, 0.01)
};

// Forward flow from emission points just above the sources out to the sphere
// |(x, z)| = r; KS-tests the crossing directions against the hemisphere law.
TestReport theorem1_uniformity(const Dataset& d, double r, std::size_t count, Rng& rng,
                               const Theorem1Options& opts = {});

// ---------------------------------------------------------------------------

struct EnergyCalibration {
  double threshold = 0.0;
  std::vector<double> null_statistics;
};

// `quantile` of the energy distance between disjoint random m-subsets of data.
EnergyCalibration calibrate_energy_threshold(const Dataset& data, std::size_t m, int reps, double quantile, Rng& rng);

struct BackwardRecoveryOptions {
  std::size_t energy_subset = 2000;
  int calibration_reps = 200;
  double calibration_quantile = 0.99;
  double threshold_scale = 1.0;
  std::optional<double> norm_clip;
};

struct BackwardRecovery {
  TestReport report;
  Mat samples;  // one generated point per row
  double mean_nfe = 0.0;
  std::size_t failures = 0;
};

// Samples the prior, integrates backward through `model` (the exact field of
// `train` when null) and compares the terminal points with `heldout`.
BackwardRecovery backward_recovery(const Dataset& train, const Dataset& heldout, const OdeConfig& cfg,
                                   std::size_t count, Rng& rng, const BackwardRecoveryOptions& opts = {},
                                   const FieldModel* model = nullptr);

// Terminal points of backward runs from prior draws.
struct Generated {
  Mat samples;
  std::vector<OdeRun> runs;  // trajectories kept only when cfg.record
  double mean_nfe = 0.0;
  std::vector<long> nfe;  // per prior draw
  std::size_t failures = 0;
};
// Draw k comes from rng.split(k), so it depends on the seed and stream of
// `rng` but not on how far `rng` has advanced.
Generated generate_samples(const FieldModel& model, const OdeConfig& cfg, std::size_t count, Rng& rng,
                           std::optional<double> norm_clip = std::nullopt);

// ---------------------------------------------------------------------------

enum class KappaZone { near, intermediate, far };
std::string_view to_string(KappaZone z);

// kappa = 2 |y|^2 / (sqrt(N) E|x|^2)
double kappa(double q_norm, double mean_sq_norm, int n);
KappaZone kappa_zone(double k);

// ---------------------------------------------------------------------------

struct NormZDiagnostic {
  TestReport report;
  std::string csv;  // z, mean_norm, std_norm, count; rows in decreasing z
};

NormZDiagnostic norm_z_diagnostic(const std::vector<OdeRun>& runs, int bins = 20);

struct Interpolation {
  std::vector<Vec> points;
  std::vector<Vec> latents;
};

Interpolation interpolate(const Vec& a, const Vec& b, int steps, const FieldModel& model, const OdeConfig& cfg);

// Spherical interpolation of directions with a linear blend of norms.
Vec slerp_latent(const Vec& a, const Vec& b, double s);

// ---------------------------------------------------------------------------

TestReport hit_probability_test(const Dataset& charges, std::size_t count, double r_start, double eps_hit,
                                double tolerance, Rng& rng);

// Max relative error of the tree field against brute force over queries.
TestReport tree_fidelity_test(const Dataset& d, const std::vector<AugmentedPoint>& queries, double theta,
                              std::size_t leaf_capacity, double tolerance);

}  // namespace pfgm
