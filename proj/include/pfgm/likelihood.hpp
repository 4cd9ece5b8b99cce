#pragma once

#include <optional>
#include <string_view>

#include "pfgm/model.hpp"
#include "pfgm/ode.hpp"

namespace pfgm {

enum class DivergenceMethod { exact_fd, hutchinson };

DivergenceMethod parse_divergence_method(std::string_view name);
std::string_view to_string(DivergenceMethod m);

struct DivergenceOptions {
  DivergenceMethod method = DivergenceMethod::exact_fd;
  int probes = 1;         // Rademacher probes for hutchinson
  double rel_step = 1e-4; // h = rel_step * (1 + |x|)
  DriftOptions drift;
};

struct DivergenceEstimate {
  double value = 0.0;
  double std_error = 0.0;  // zero for exact_fd
  long evaluations = 0;
};

// Trace of d/dx of g(x) = v_x z / v_z at fixed z. Hutchinson needs an rng,
// or a fixed set of probes (one per column).
DivergenceEstimate drift_divergence(const AugmentedPoint& q, const FieldModel& model, const DivergenceOptions& opts,
                                    Rng* rng = nullptr, const Mat* probes = nullptr);

struct LikelihoodResult {
  double log_density = 0.0;  // natural log
  double bits_per_dim = 0.0;
  double divergence_integral = 0.0;
  long nfe = 0;
  Vec latent;  // x on the z = z_max hyperplane
  RunStatus status = RunStatus::ok;
  std::string message;
};

double bits_per_dim(double log_density, int n);

// log p(x) = log p_prior(x(log z_max)) + integral of div g along the forward
// flow from log z_min. Hutchinson draws its probes once per call from rng.
LikelihoodResult log_likelihood(const Vec& x, const FieldModel& model, const OdeConfig& cfg,
                                DivergenceMethod method = DivergenceMethod::exact_fd, Rng* rng = nullptr,
                                int probes = 1);

// Accumulated divergence along a flow between two heights, for direction
// reversal checks.
struct FlowWithDivergence {
  Vec x;
  double divergence_integral = 0.0;
  long nfe = 0;
  RunStatus status = RunStatus::ok;
  std::string message;
};
FlowWithDivergence integrate_with_divergence(const Vec& x0, double z_from, double z_to, const FieldModel& model,
                                             const OdeConfig& cfg, const DivergenceOptions& div,
                                             const Mat* probes = nullptr);

}  // namespace pfgm
