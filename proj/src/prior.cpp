#include "pfgm/prior.hpp"

#include <cmath>
#include <numbers>

#include "pfgm/error.hpp"

namespace pfgm {

void PriorSpec::validate() const {
  if (!(z_max > 0.0)) throw DomainError("prior: z_max must be positive");
  if (n < 1) throw DomainError("prior: dimension must be >= 1");
  if (norm_clip && !(*norm_clip > 0.0)) throw DomainError("prior: norm_clip must be positive");
}

double prior_log_density(const Vec& x, const PriorSpec& p) {
  p.validate();
  if (x.size() != p.n) throw DimensionError("prior_log_density: dimension mismatch");
  return std::numbers::ln2 + std::log(p.z_max) - std::log(surface_area_unit_sphere(p.n)) -
         0.5 * (p.n + 1) * std::log(x.squaredNorm() + p.z_max * p.z_max);
}

double sample_beta(double alpha, double beta, Rng& rng) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("sample_beta: shapes must be positive");
  for (;;) {
    const double a = rng.gamma(alpha);
    const double b = rng.gamma(beta);
    const double s = a + b;
    // Both gammas can underflow to zero for tiny shapes; redraw.
    if (s > 0.0) {
      const double r = a / s;
      if (r > 0.0 && r < 1.0) return r;
    }
  }
}

double sample_prior_radius(const PriorSpec& p, Rng& rng) {
  const double r1 = sample_beta(0.5 * p.n, 0.5, rng);
  const double r2 = r1 / (1.0 - r1);
  return p.z_max * std::sqrt(r2);
}

Vec sample_prior(const PriorSpec& p, Rng& rng) {
  p.validate();
  for (;;) {
    const double radius = sample_prior_radius(p, rng);
    if (p.norm_clip && !(radius < *p.norm_clip)) continue;
    if (!(radius > 0.0)) continue;
    Vec dir = p.n == 1 ? Vec::Constant(1, rng.uniform() < 0.5 ? -1.0 : 1.0) : sample_unit_sphere(p.n - 1, rng);
    return radius * dir;
  }
}

double prior_radius_density_unnormalized(double r, const PriorSpec& p) {
  return std::pow(r, p.n - 1) / std::pow(r * r + p.z_max * p.z_max, 0.5 * (p.n + 1));
}

}  // namespace pfgm
