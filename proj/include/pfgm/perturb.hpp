#pragma once

#include <optional>

#include "pfgm/field.hpp"
#include "pfgm/geometry.hpp"

namespace pfgm {

struct PerturbConfig {
  int M = 1;
  double sigma = 0.01;
  double tau = 0.03;
  double gamma = 5.0;
  // Optional cap on the exponent for draws whose |eps_z| is below a
  // threshold. Off unless both are set.
  std::optional<double> small_eps_z_threshold;
  std::optional<int> capped_M;

  void validate() const;
};

struct DerivedSchedule {
  double z_max = 0.0;
  double z_min = 1e-3;
  double norm_clip = 0.0;
};

// Augmented training point
//   y = x + |eps_x| (1+tau)^m u,   z = |eps_z| (1+tau)^m
// with m ~ U[0, M], eps ~ N(0, sigma^2 I_(N+1)), u uniform on the unit sphere of R^N.
AugmentedPoint perturb(const Vec& x, const PerturbConfig& cfg, Rng& rng);

// Same, with the exponent m fixed instead of drawn.
AugmentedPoint perturb_with_exponent(const Vec& x, double m, const PerturbConfig& cfg, Rng& rng);

// ceil(3/4 * ln(E|x|^2 / (2 sqrt(N) sigma^2)) / ln(1 + tau)), at least 1.
int rule_of_thumb_M(double mean_sq_norm, int n, double sigma, double tau);

// z_max = sqrt(2/pi) sigma (1+tau)^M, norm_clip = sqrt(N) sigma (1+tau)^M.
DerivedSchedule rule_of_thumb_schedule(double mean_sq_norm, int n, double sigma, double tau, int M);

}  // namespace pfgm
