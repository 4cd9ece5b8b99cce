#pragma once

#include <optional>

#include "pfgm/geometry.hpp"

namespace pfgm {

// Radial projection of the uniform upper hemisphere onto the hyperplane
// z = z_max, a heavy-tailed density on R^N.
struct PriorSpec {
  double z_max = 40.0;
  int n = 2;
  std::optional<double> norm_clip;

  void validate() const;
};

double prior_log_density(const Vec& x, const PriorSpec& p);

// R1 ~ Beta(N/2, 1/2), R2 = R1 / (1 - R1), radius = z_max sqrt(R2), with a
// uniform direction. Draws outside (0, norm_clip) are redrawn.
Vec sample_prior(const PriorSpec& p, Rng& rng);

// Radius of a prior draw, before any clipping.
double sample_prior_radius(const PriorSpec& p, Rng& rng);

// Beta(alpha, beta) as G_a / (G_a + G_b) with G ~ Gamma(shape, 1).
double sample_beta(double alpha, double beta, Rng& rng);

// Unnormalized radial density R^(N-1) / (R^2 + z_max^2)^((N+1)/2).
double prior_radius_density_unnormalized(double r, const PriorSpec& p);

}  // namespace pfgm
