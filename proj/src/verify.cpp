#include "pfgm/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include <boost/math/special_functions/beta.hpp>

#include "pfgm/error.hpp"
#include "pfgm/prior.hpp"
#include "pfgm/stats.hpp"

namespace pfgm {

using nlohmann::json;

json to_json(const TestReport& r) {
  return {{"name", r.name},
          {"statistic", r.statistic},
          {"threshold", r.threshold},
          {"pass", r.pass},
          {"samples_used", r.samples_used},
          {"details", r.details}};
}

double hemisphere_polar_cdf(double c, int n) {
  if (c <= 0.0) return 0.0;
  if (c >= 1.0) return 1.0;
  return boost::math::ibeta(0.5, 0.5 * n, c * c);
}

double hemisphere_azimuth_cdf(double a, int n) {
  if (n == 2) return std::clamp(a / (2.0 * std::numbers::pi), 0.0, 1.0);
  if (a <= -1.0) return 0.0;
  if (a >= 1.0) return 1.0;
  const double half = 0.5 * boost::math::ibeta(0.5, 0.5 * (n - 1), a * a);
  return a < 0.0 ? 0.5 - half : 0.5 + half;
}

namespace {

std::size_t pick_source(const Dataset& d, const std::vector<double>& cumulative, Rng& rng) {
  if (cumulative.empty()) return static_cast<std::size_t>(rng.below(d.size()));
  const double u = rng.uniform() * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative.begin()), d.size() - 1);
}

}  // namespace

TestReport theorem1_uniformity(const Dataset& d, double r, std::size_t count, Rng& rng, const Theorem1Options& opts) {
  if (count == 0) throw DomainError("theorem1_uniformity: count must be positive");
  const auto s = stats(d);
  const int n = d.dim();
  if (!(r >= 1e3 * s.max_norm)) {
    std::ostringstream msg;
    msg << "theorem1_uniformity: r = " << r << " is not in the far zone; need r >= 1e3 * max_norm = "
        << 1e3 * s.max_norm << " (kappa = " << kappa(r, s.mean_sq_norm, n) << ")";
    throw DomainError(msg.str());
  }
  const ExactFieldModel model(d, 0.0);
  std::vector<double> cumulative;
  if (d.has_charges()) {
    cumulative.resize(d.size());
    std::partial_sum(d.charges().begin(), d.charges().end(), cumulative.begin());
  }

  std::vector<double> polar, azimuth;
  polar.reserve(count);
  azimuth.reserve(count);
  std::size_t failures = 0;
  long evaluations = 0;
  const DriftOptions dopt{0.0, 0.0, 0.0};
  const auto f = [&](double t, const Vec& x) -> Vec {
    const double z = std::exp(t);
    return drift({x, z}, model, dopt).head(n);
  };

  for (std::size_t k = 0; k < count; ++k) {
    Rng prng = rng.split(k);
    const std::size_t src = pick_source(d, cumulative, prng);
    Vec u;
    do {
      u = sample_unit_sphere(n, prng);
    } while (u[n] == 0.0);
    u[n] = std::abs(u[n]);
    const Vec x0 = d.point(src) + opts.start_radius * u.head(n);
    const double z0 = opts.start_radius * u[n];

    Vec p_prev, p_next;
    Rk45Options ro;
    ro.atol = opts.atol;
    ro.rtol = opts.rtol;
    ro.on_step = [&](double t0, const Vec& y0, double t1, const Vec& y1) {
      Vec a(n + 1), b(n + 1);
      a << y0, std::exp(t0);
      b << y1, std::exp(t1);
      if (b.norm() >= r) {
        p_prev = a;
        p_next = b;
        return false;
      }
      return true;
    };
    try {
      const auto res = integrate_rk45(f, std::log(z0), std::log(r), x0, ro);
      evaluations += res.evaluations;
      if (!res.stopped) {
        ++failures;
        continue;
      }
    } catch (const Error&) {
      ++failures;
      continue;
    }
    // Point on the segment p_prev -> p_next at distance r from the origin.
    const Vec dp = p_next - p_prev;
    const double qa = dp.squaredNorm(), qb = 2.0 * p_prev.dot(dp), qc = p_prev.squaredNorm() - r * r;
    const double lambda = qa > 0.0 ? (-qb + std::sqrt(std::max(0.0, qb * qb - 4.0 * qa * qc))) / (2.0 * qa) : 1.0;
    const Vec dir = (p_prev + std::clamp(lambda, 0.0, 1.0) * dp).normalized();
    polar.push_back(dir[n]);
    if (n == 2) {
      double a = std::atan2(dir[1], dir[0]);
      if (a < 0.0) a += 2.0 * std::numbers::pi;
      azimuth.push_back(a);
    } else {
      azimuth.push_back(dir[0] / dir.head(n).norm());
    }
  }

  TestReport rep;
  rep.name = "theorem1_uniformity";
  rep.samples_used = polar.size();
  rep.threshold = opts.threshold > 0.0 ? opts.threshold : ks_critical_value(count, 0.01);
  if (polar.empty()) {
    rep.statistic = 1.0;
    rep.pass = false;
    rep.details = {{"failures", failures}};
    return rep;
  }
  const double ks_polar = ks_statistic(polar, [n](double c) { return hemisphere_polar_cdf(c, n); });
  const double ks_azimuth = ks_statistic(azimuth, [n](double a) { return hemisphere_azimuth_cdf(a, n); });
  rep.statistic = std::max(ks_polar, ks_azimuth);
  rep.pass = failures == 0 && ks_polar < rep.threshold && ks_azimuth < rep.threshold;
  rep.details = {{"ks_polar", ks_polar},
                 {"ks_azimuth", ks_azimuth},
                 {"radius", r},
                 {"sources", d.size()},
                 {"failures", failures},
                 {"mean_evaluations", static_cast<double>(evaluations) / static_cast<double>(count)},
                 {"kappa", s.mean_sq_norm > 0.0 ? json(kappa(r, s.mean_sq_norm, n)) : json(nullptr)}};
  return rep;
}

// ---------------------------------------------------------------------------

EnergyCalibration calibrate_energy_threshold(const Dataset& data, std::size_t m, int reps, double q, Rng& rng) {
  if (m < 2 || 2 * m > data.size()) throw DomainError("calibration needs two disjoint subsets of size m >= 2");
  if (reps < 1) throw DomainError("calibration needs at least one replicate");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  EnergyCalibration out;
  for (int rep = 0; rep < reps; ++rep) {
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    const std::vector<std::size_t> a(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
    const std::vector<std::size_t> b(idx.begin() + static_cast<std::ptrdiff_t>(m),
                                     idx.begin() + static_cast<std::ptrdiff_t>(2 * m));
    out.null_statistics.push_back(energy_distance(data.subset(a).points(), data.subset(b).points()));
  }
  out.threshold = quantile(out.null_statistics, q);
  return out;
}

Generated generate_samples(const FieldModel& model, const OdeConfig& cfg, std::size_t count, Rng& rng,
                           std::optional<double> norm_clip) {
  const int n = model.dim();
  const PriorSpec prior{cfg.z_max, n, norm_clip};
  Generated out;
  std::vector<Vec> ok;
  ok.reserve(count);
  double nfe = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    Rng prng = rng.split(k);
    const Vec x0 = sample_prior(prior, prng);
    OdeRun run = integrate_backward(x0, model, cfg);
    nfe += static_cast<double>(run.nfe);
    out.nfe.push_back(run.nfe);
    if (run.ok())
      ok.push_back(run.terminal.x);
    else
      ++out.failures;
    if (cfg.record) out.runs.push_back(std::move(run));
  }
  out.mean_nfe = count ? nfe / static_cast<double>(count) : 0.0;
  out.samples.resize(static_cast<Eigen::Index>(ok.size()), n);
  for (std::size_t i = 0; i < ok.size(); ++i) out.samples.row(static_cast<Eigen::Index>(i)) = ok[i].transpose();
  return out;
}

BackwardRecovery backward_recovery(const Dataset& train, const Dataset& heldout, const OdeConfig& cfg,
                                   std::size_t count, Rng& rng, const BackwardRecoveryOptions& opts,
                                   const FieldModel* model) {
  if (train.dim() != heldout.dim()) throw DimensionError("backward_recovery: train and heldout dimensions differ");
  std::optional<ExactFieldModel> exact;
  if (!model) {
    exact.emplace(train, cfg.gamma);
    model = &*exact;
  }
  Rng gen_rng = rng.split(1);
  Rng cal_rng = rng.split(2);
  Rng pick_rng = rng.split(3);
  OdeConfig run_cfg = cfg;
  run_cfg.record = false;
  Generated gen = generate_samples(*model, run_cfg, count, gen_rng, opts.norm_clip);

  BackwardRecovery out;
  out.samples = gen.samples;
  out.mean_nfe = gen.mean_nfe;
  out.failures = gen.failures;
  TestReport& rep = out.report;
  rep.name = "backward_recovery";
  const std::size_t m =
      std::min({opts.energy_subset, static_cast<std::size_t>(gen.samples.rows()), heldout.size() / 2});
  if (m < 2) throw DomainError("backward_recovery: too few samples for the energy distance");
  const auto cal = calibrate_energy_threshold(heldout, m, opts.calibration_reps, opts.calibration_quantile, cal_rng);

  std::vector<std::size_t> idx(heldout.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), pick_rng.engine());
  idx.resize(m);
  const Mat ref = heldout.subset(idx).points();
  const Mat gen_m = gen.samples.topRows(static_cast<Eigen::Index>(m));

  rep.statistic = energy_distance(gen_m, ref);
  rep.threshold = opts.threshold_scale * cal.threshold;
  rep.pass = gen.failures == 0 && rep.statistic < rep.threshold;
  rep.samples_used = m;
  rep.details = {{"generated", gen.samples.rows()},
                 {"failures", gen.failures},
                 {"mean_nfe", gen.mean_nfe},
                 {"calibrated_threshold", cal.threshold},
                 {"threshold_scale", opts.threshold_scale},
                 {"calibration_reps", opts.calibration_reps},
                 {"calibration_quantile", opts.calibration_quantile},
                 {"model", model->kind()}};
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(KappaZone z) {
  switch (z) {
    case KappaZone::near: return "near";
    case KappaZone::intermediate: return "intermediate";
    case KappaZone::far: return "far";
  }
  return "unknown";
}

double kappa(double q_norm, double mean_sq_norm, int n) {
  if (!(mean_sq_norm > 0.0) || n < 1) throw DomainError("kappa: need positive E|x|^2 and n");
  return 2.0 * q_norm * q_norm / (std::sqrt(static_cast<double>(n)) * mean_sq_norm);
}

KappaZone kappa_zone(double k) {
  if (k > 100.0) return KappaZone::far;
  if (k < 0.01) return KappaZone::near;
  return KappaZone::intermediate;
}

// ---------------------------------------------------------------------------

NormZDiagnostic norm_z_diagnostic(const std::vector<OdeRun>& runs, int bins) {
  if (runs.empty()) throw DomainError("norm_z_diagnostic: no runs");
  if (bins < 1) throw DomainError("norm_z_diagnostic: bins must be >= 1");
  double t_hi = -std::numeric_limits<double>::infinity(), t_lo = std::numeric_limits<double>::infinity();
  bool monotone = true;
  bool complete = true;
  int n = 0;
  for (const auto& run : runs) {
    if (run.trajectory.size() < 2) {
      complete = false;
      continue;
    }
    n = static_cast<int>(run.trajectory.front().x.size());
    const double dir = run.trajectory.back().t < run.trajectory.front().t ? -1.0 : 1.0;
    for (std::size_t i = 1; i < run.trajectory.size(); ++i)
      if (!(dir * (run.trajectory[i].t - run.trajectory[i - 1].t) > 0.0)) monotone = false;
    for (const auto& p : run.trajectory) {
      t_hi = std::max(t_hi, p.t);
      t_lo = std::min(t_lo, p.t);
      if (p.z != std::exp(p.t)) monotone = false;
    }
  }
  NormZDiagnostic out;
  TestReport& rep = out.report;
  rep.name = "norm_z_diagnostic";
  if (!(t_hi > t_lo)) {
    rep.pass = false;
    rep.details = {{"reason", "no usable trajectories"}};
    return out;
  }

  // Bin centers in t' from high z to low z; each run contributes |x| interpolated at the center.
  std::vector<double> sum(static_cast<std::size_t>(bins), 0.0), sum_sq(sum.size(), 0.0);
  std::vector<std::size_t> cnt(sum.size(), 0);
  std::vector<double> centers(sum.size());
  const double width = (t_hi - t_lo) / bins;
  for (int b = 0; b < bins; ++b) centers[static_cast<std::size_t>(b)] = t_hi - (b + 0.5) * width;
  std::vector<double> first_bin;
  for (const auto& run : runs) {
    if (run.trajectory.size() < 2) continue;
    std::vector<std::pair<double, double>> tn;
    for (const auto& p : run.trajectory) tn.emplace_back(p.t, p.norm_x);
    std::sort(tn.begin(), tn.end());
    for (std::size_t b = 0; b < centers.size(); ++b) {
      const double t = centers[b];
      if (t < tn.front().first || t > tn.back().first) continue;
      auto it = std::lower_bound(tn.begin(), tn.end(), std::make_pair(t, -std::numeric_limits<double>::infinity()));
      double v = it->second;
      if (it != tn.begin() && it->first != t) {
        const auto& lo = *(it - 1);
        v = lo.second + (t - lo.first) / (it->first - lo.first) * (it->second - lo.second);
      }
      sum[b] += v;
      sum_sq[b] += v * v;
      ++cnt[b];
      if (b == 0) first_bin.push_back(v);
    }
  }
  std::ostringstream csv;
  csv.precision(17);
  csv << "z,mean_norm,std_norm,count\n";
  bool populated = true, finite = true;
  json table = json::array();
  for (std::size_t b = 0; b < centers.size(); ++b) {
    const double c = static_cast<double>(cnt[b]);
    const double mean = c > 0 ? sum[b] / c : std::numeric_limits<double>::quiet_NaN();
    const double var = c > 1 ? std::max(0.0, (sum_sq[b] - c * mean * mean) / (c - 1.0)) : 0.0;
    const double sd = std::sqrt(var);
    if (cnt[b] == 0) populated = false;
    if (!std::isfinite(sd)) finite = false;
    csv << std::exp(centers[b]) << ',' << mean << ',' << sd << ',' << cnt[b] << '\n';
  }
  out.csv = csv.str();
  rep.pass = populated && finite && monotone && complete;
  rep.statistic = static_cast<double>(std::count(cnt.begin(), cnt.end(), std::size_t{0}));
  rep.threshold = 0.0;
  rep.samples_used = runs.size();
  rep.details = {{"bins", bins}, {"populated", populated}, {"finite", finite}, {"monotone", monotone},
                 {"complete", complete}};
  if (first_bin.size() > 1 && n > 0) {
    double m = 0.0, s2 = 0.0;
    for (double v : first_bin) m += v;
    m /= static_cast<double>(first_bin.size());
    for (double v : first_bin) s2 += (v - m) * (v - m);
    const double rel = std::sqrt(s2 / static_cast<double>(first_bin.size() - 1)) / m;
    rep.details["prior_rel_std"] = rel;
    rep.details["gaussian_rel_std"] = chi_relative_std(n);
    rep.details["spread_exceeds_gaussian"] = rel > chi_relative_std(n);
  }
  return out;
}

Vec slerp_latent(const Vec& a, const Vec& b, double s) {
  const double na = a.norm(), nb = b.norm();
  const double norm = (1.0 - s) * na + s * nb;
  if (na == 0.0 || nb == 0.0) return (1.0 - s) * a + s * b;
  const Vec ua = a / na, ub = b / nb;
  const double omega = std::acos(std::clamp(ua.dot(ub), -1.0, 1.0));
  Vec dir;
  if (omega < 1e-12) {
    dir = ua;
  } else {
    dir = (std::sin((1.0 - s) * omega) * ua + std::sin(s * omega) * ub) / std::sin(omega);
  }
  return norm * dir.normalized();
}

Interpolation interpolate(const Vec& a, const Vec& b, int steps, const FieldModel& model, const OdeConfig& cfg) {
  if (steps < 1) throw DomainError("interpolate: steps must be >= 1");
  OdeConfig c = cfg;
  c.record = false;
  const OdeRun fa = integrate_forward(a, model, c);
  const OdeRun fb = integrate_forward(b, model, c);
  if (!fa.ok() || !fb.ok()) throw NumericalError("interpolate: forward mapping failed");
  Interpolation out;
  for (int k = 0; k < steps; ++k) {
    const double s = steps == 1 ? 0.0 : static_cast<double>(k) / (steps - 1);
    const Vec latent = slerp_latent(fa.terminal.x, fb.terminal.x, s);
    const OdeRun back = integrate_backward(latent, model, c);
    if (!back.ok()) throw NumericalError("interpolate: backward mapping failed: " + back.message);
    out.latents.push_back(latent);
    out.points.push_back(back.terminal.x);
  }
  return out;
}

// ---------------------------------------------------------------------------

TestReport hit_probability_test(const Dataset& charges, std::size_t count, double r_start, double eps_hit,
                                double tolerance, Rng& rng) {
  const auto res = hit_particles(charges, count, r_start, eps_hit, rng);
  const auto freq = res.frequencies();
  const double total = charges.total_charge();
  TestReport rep;
  rep.name = "hit_probability";
  rep.threshold = tolerance;
  rep.samples_used = count;
  std::vector<double> expected;
  for (std::size_t i = 0; i < charges.size(); ++i) {
    expected.push_back(charges.charge(i) / total);
    rep.statistic = std::max(rep.statistic, std::abs(freq[i] - expected.back()));
  }
  const double lost_fraction = static_cast<double>(res.lost) / static_cast<double>(count);
  rep.pass = rep.statistic <= tolerance && lost_fraction < 1e-3;
  rep.details = {{"frequencies", freq},
                 {"expected", expected},
                 {"lost", res.lost},
                 {"lost_fraction", lost_fraction},
                 {"r_start", r_start},
                 {"eps_hit", eps_hit},
                 {"mean_evaluations", static_cast<double>(res.evaluations) / static_cast<double>(count)}};
  return rep;
}

TestReport tree_fidelity_test(const Dataset& d, const std::vector<AugmentedPoint>& queries, double theta,
                              std::size_t leaf_capacity, double tolerance) {
  const TreeCode tree(d, leaf_capacity, theta);
  TestReport rep;
  rep.name = "tree_fidelity";
  rep.threshold = tolerance;
  rep.samples_used = queries.size();
  for (const auto& q : queries) {
    const Vec exact = unnormalized_field(q, d);
    const Vec approx = tree_field(q, tree);
    rep.statistic = std::max(rep.statistic, (approx - exact).norm() / exact.norm());
  }
  rep.pass = rep.statistic < tolerance;
  rep.details = {{"theta", theta}, {"leaf_capacity", leaf_capacity}, {"sources", d.size()}};
  return rep;
}

}  // namespace pfgm
