#include "pfgm/perturb.hpp"

#include <cmath>
#include <numbers>

#include "pfgm/error.hpp"

namespace pfgm {

void PerturbConfig::validate() const {
  if (M < 1) throw DomainError("perturb: M must be >= 1");
  if (!(sigma > 0.0)) throw DomainError("perturb: sigma must be positive");
  if (!(tau > 0.0)) throw DomainError("perturb: tau must be positive");
  if (gamma < 0.0) throw DomainError("perturb: gamma must be nonnegative");
  if (capped_M && *capped_M < 0) throw DomainError("perturb: capped_M must be nonnegative");
}

AugmentedPoint perturb_with_exponent(const Vec& x, double m, const PerturbConfig& cfg, Rng& rng) {
  const auto n = static_cast<int>(x.size());
  if (n < 1) throw DimensionError("perturb: empty data vector");
  const Vec eps_x = sample_gaussian(n, cfg.sigma, rng);
  const double eps_z = cfg.sigma * rng.normal();
  const Vec u = n == 1 ? Vec::Constant(1, rng.uniform() < 0.5 ? -1.0 : 1.0) : sample_unit_sphere(n - 1, rng);
  const double scale = std::pow(1.0 + cfg.tau, m);
  return {x + eps_x.norm() * scale * u, std::abs(eps_z) * scale};
}

AugmentedPoint perturb(const Vec& x, const PerturbConfig& cfg, Rng& rng) {
  cfg.validate();
  double m = rng.uniform(0.0, static_cast<double>(cfg.M));
  const Vec eps_x = sample_gaussian(static_cast<int>(x.size()), cfg.sigma, rng);
  const double eps_z = cfg.sigma * rng.normal();
  if (cfg.small_eps_z_threshold && cfg.capped_M && std::abs(eps_z) < *cfg.small_eps_z_threshold)
    m = std::min(m, static_cast<double>(*cfg.capped_M));
  const auto n = static_cast<int>(x.size());
  const Vec u = n == 1 ? Vec::Constant(1, rng.uniform() < 0.5 ? -1.0 : 1.0) : sample_unit_sphere(n - 1, rng);
  const double scale = std::pow(1.0 + cfg.tau, m);
  return {x + eps_x.norm() * scale * u, std::abs(eps_z) * scale};
}

int rule_of_thumb_M(double mean_sq_norm, int n, double sigma, double tau) {
  if (!(mean_sq_norm > 0.0) || n < 1 || !(sigma > 0.0) || !(tau > 0.0))
    throw DomainError("rule_of_thumb_M: arguments must be positive");
  const double ratio = mean_sq_norm / (2.0 * std::sqrt(static_cast<double>(n)) * sigma * sigma);
  const double m = 0.75 * std::log(ratio) / std::log1p(tau);
  return std::max(1, static_cast<int>(std::ceil(m)));
}

DerivedSchedule rule_of_thumb_schedule(double mean_sq_norm, int n, double sigma, double tau, int M) {
  if (!(mean_sq_norm > 0.0) || n < 1 || !(sigma > 0.0) || !(tau > 0.0) || M < 1)
    throw DomainError("rule_of_thumb_schedule: arguments must be positive");
  const double growth = std::pow(1.0 + tau, M);
  DerivedSchedule s;
  s.z_max = std::sqrt(2.0 / std::numbers::pi) * sigma * growth;
  s.norm_clip = std::sqrt(static_cast<double>(n)) * sigma * growth;
  return s;
}

}  // namespace pfgm
