#include "pfgm/likelihood.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "pfgm/error.hpp"
#include "pfgm/prior.hpp"

namespace pfgm {

DivergenceMethod parse_divergence_method(std::string_view name) {
  if (name == "exact_fd" || name == "exact") return DivergenceMethod::exact_fd;
  if (name == "hutchinson") return DivergenceMethod::hutchinson;
  throw DomainError("unknown divergence method '" + std::string(name) + "'");
}

std::string_view to_string(DivergenceMethod m) {
  return m == DivergenceMethod::exact_fd ? "exact_fd" : "hutchinson";
}

double bits_per_dim(double log_density, int n) { return -log_density / (n * std::numbers::ln2); }

DivergenceEstimate drift_divergence(const AugmentedPoint& q, const FieldModel& model, const DivergenceOptions& opts,
                                    Rng* rng, const Mat* probes) {
  const int n = model.dim();
  if (q.x.size() != n) throw DimensionError("drift_divergence: dimension mismatch");
  const double h = opts.rel_step * (1.0 + q.x.norm());
  DivergenceEstimate out;
  auto g = [&](const Vec& x) {
    ++out.evaluations;
    return Vec(drift({x, q.z}, model, opts.drift).head(n));
  };
  auto check = [](double v, int coord) {
    if (!std::isfinite(v))
      throw NumericalError("non-finite divergence difference in coordinate " + std::to_string(coord));
  };

  if (opts.method == DivergenceMethod::exact_fd) {
    for (int j = 0; j < n; ++j) {
      Vec xp = q.x, xm = q.x;
      xp[j] += h;
      xm[j] -= h;
      const double d = (g(xp)[j] - g(xm)[j]) / (2.0 * h);
      check(d, j);
      out.value += d;
    }
    return out;
  }

  Mat drawn;
  if (!probes) {
    if (!rng) throw DomainError("hutchinson divergence needs an rng or probes");
    if (opts.probes < 1) throw DomainError("hutchinson needs at least one probe");
    drawn.resize(n, opts.probes);
    for (Eigen::Index k = 0; k < drawn.cols(); ++k)
      for (int j = 0; j < n; ++j) drawn(j, k) = rng->uniform() < 0.5 ? -1.0 : 1.0;
    probes = &drawn;
  }
  const auto k = probes->cols();
  double sum = 0.0, sum_sq = 0.0;
  for (Eigen::Index c = 0; c < k; ++c) {
    const Vec eps = probes->col(c);
    const double d = eps.dot(g(q.x + h * eps) - g(q.x - h * eps)) / (2.0 * h);
    check(d, static_cast<int>(c));
    sum += d;
    sum_sq += d * d;
  }
  out.value = sum / static_cast<double>(k);
  if (k > 1) {
    const double var = std::max(0.0, (sum_sq - k * out.value * out.value) / static_cast<double>(k - 1));
    out.std_error = std::sqrt(var / static_cast<double>(k));
  }
  return out;
}

FlowWithDivergence integrate_with_divergence(const Vec& x0, double z_from, double z_to, const FieldModel& model,
                                             const OdeConfig& cfg, const DivergenceOptions& div_in,
                                             const Mat* probes) {
  cfg.validate();
  const int n = model.dim();
  if (x0.size() != n) throw DimensionError("likelihood: dimension mismatch");
  if (div_in.method == DivergenceMethod::hutchinson && (!probes || probes->rows() != n || probes->cols() < 1))
    throw DomainError("hutchinson flow needs fixed probes with N rows");
  DivergenceOptions div = div_in;
  div.drift = {cfg.v_z_floor, cfg.z_sub_threshold, cfg.gamma};
  FlowWithDivergence out;
  out.x = x0;

  // State: x followed by the accumulated divergence.
  auto rhs = [&](double t, const Vec& s) -> Vec {
    const double z = std::exp(t);
    const AugmentedPoint q{s.head(n), z};
    Vec ds(n + 1);
    ++out.nfe;
    ds.head(n) = drift(q, model, div.drift).head(n);
    const auto est = drift_divergence(q, model, div, nullptr, probes);
    out.nfe += est.evaluations;
    ds[n] = est.value;
    return ds;
  };

  const double t_from = std::log(z_from);
  const double t_to = std::log(z_to);
  Vec state(n + 1);
  state.head(n) = x0;
  state[n] = 0.0;
  try {
    if (cfg.solver == Solver::euler) {
      const double dt = (t_to - t_from) / cfg.euler_steps;
      for (int i = 0; i < cfg.euler_steps; ++i) {
        const double t_i = t_from + i * dt;
        const double t_next = i + 1 == cfg.euler_steps ? t_to : t_from + (i + 1) * dt;
        const Vec ds = rhs(t_i, state);
        const double z_i = std::exp(t_i);
        // Exact z-integration for x; the divergence uses the plain Euler rule.
        state.head(n) += ds.head(n) / z_i * (std::exp(t_next) - z_i);
        state[n] += ds[n] * (t_next - t_i);
        if (!state.allFinite()) {
          out.status = RunStatus::non_finite;
          out.message = "non-finite state";
          break;
        }
      }
    } else {
      Rk45Options opts;
      opts.atol = cfg.rk45_atol;
      opts.rtol = cfg.rk45_rtol;
      opts.max_steps = cfg.max_steps;
      opts.on_step = [](double, const Vec&, double, const Vec& y) { return y.allFinite(); };
      const auto res = integrate_rk45(rhs, t_from, t_to, state, opts);
      state = res.y;
      if (!state.allFinite()) {
        out.status = RunStatus::non_finite;
        out.message = "non-finite state";
      } else if (!res.reached_end) {
        out.status = RunStatus::step_budget;
        out.message = "step budget or step-size underflow";
      }
    }
  } catch (const DegenerateFieldError& e) {
    out.status = RunStatus::degenerate_field;
    out.message = e.what();
  } catch (const SingularityError& e) {
    out.status = RunStatus::singular;
    out.message = e.what();
  }
  out.x = state.head(n);
  out.divergence_integral = state[n];
  return out;
}

LikelihoodResult log_likelihood(const Vec& x, const FieldModel& model, const OdeConfig& cfg, DivergenceMethod method,
                                Rng* rng, int probes) {
  const int n = model.dim();
  DivergenceOptions div;
  div.method = method;
  div.probes = probes;
  Mat fixed;
  if (method == DivergenceMethod::hutchinson) {
    if (!rng) throw DomainError("hutchinson likelihood needs an rng");
    if (probes < 1) throw DomainError("hutchinson needs at least one probe");
    fixed.resize(n, probes);
    for (Eigen::Index k = 0; k < fixed.cols(); ++k)
      for (int j = 0; j < n; ++j) fixed(j, k) = rng->uniform() < 0.5 ? -1.0 : 1.0;
  }
  const auto flow = integrate_with_divergence(x, cfg.z_min, cfg.z_max, model, cfg, div,
                                              method == DivergenceMethod::hutchinson ? &fixed : nullptr);
  LikelihoodResult r;
  r.status = flow.status;
  r.message = flow.message;
  r.nfe = flow.nfe;
  r.latent = flow.x;
  r.divergence_integral = flow.divergence_integral;
  if (flow.status != RunStatus::ok) {
    r.log_density = std::numeric_limits<double>::quiet_NaN();
    r.bits_per_dim = r.log_density;
    return r;
  }
  r.log_density = prior_log_density(flow.x, {cfg.z_max, n, std::nullopt}) + flow.divergence_integral;
  r.bits_per_dim = bits_per_dim(r.log_density, n);
  return r;
}

}  // namespace pfgm
