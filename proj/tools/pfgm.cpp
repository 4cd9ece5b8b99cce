// pfgm: command-line front end for data generation, training, sampling,
// likelihood evaluation, verification, interpolation and field queries.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pfgm/config.hpp"
#include "pfgm/error.hpp"
#include "pfgm/likelihood.hpp"
#include "pfgm/stats.hpp"
#include "pfgm/verify.hpp"

#ifndef PFGM_VERSION
#define PFGM_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pfgm;

namespace {

enum Exit : int {
  ok = 0,
  internal = 1,
  usage = 2,
  bad_config = 3,
  missing_checkpoint = 4,
  dimension_mismatch = 5,
  domain = 6,
  numerical = 7,
  io = 8,
  verification_failed = 9,
};

int exit_code_for(const std::string& code) {
  if (code == "parse") return bad_config;
  if (code == "missing_checkpoint") return missing_checkpoint;
  if (code == "dimension") return dimension_mismatch;
  if (code == "domain") return domain;
  if (code == "io") return io;
  if (code == "singularity" || code == "degenerate_field" || code == "numerical") return numerical;
  return internal;
}

// Options shared by every subcommand. Unset flags leave the config alone.
struct Flags {
  std::string config;
  std::vector<std::string> set;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, solver, dataset, suite, checkpoint;
  std::optional<int> steps;
  std::optional<std::size_t> count;
  bool exact = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "key = value run-config file");
  cmd->add_option("--set", f.set, "override any config key, key=value (repeatable)");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--solver", f.solver, "ODE solver")->check(CLI::IsMember({"euler", "rk45"}));
  cmd->add_option("--steps", f.steps, "Euler steps");
  cmd->add_option("--count", f.count, "number of samples, particles or points");
  cmd->add_option("--dataset", f.dataset, "toy name (heart, disk, gaussians, checkerboard) or CSV path");
}

void add_model(CLI::App* cmd, Flags& f) {
  cmd->add_flag("--exact", f.exact, "use the empirical field of the dataset instead of a network");
  cmd->add_option("--checkpoint", f.checkpoint, "trained model checkpoint (JSON)");
}

bool looks_like_path(const std::string& s) {
  return s.find('/') != std::string::npos || s.find('.') != std::string::npos || fs::exists(s);
}

// defaults < config file < environment < flags
RunConfig build_config(const Flags& f) {
  RunConfig cfg;
  if (!f.config.empty()) cfg = load_config(f.config, cfg);
  apply_env_overrides(cfg);
  for (const auto& kv : f.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ParseError("--set expects key=value, got '" + kv + "'", 0);
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out = *f.out;
  if (f.solver) cfg.solver = *f.solver;
  if (f.steps) cfg.euler_steps = *f.steps;
  if (f.count) cfg.count = *f.count;
  if (f.suite) cfg.suite = *f.suite;
  if (f.dataset) {
    if (looks_like_path(*f.dataset)) {
      cfg.dataset_path = *f.dataset;
    } else {
      cfg.dataset = *f.dataset;
      cfg.dataset_path.clear();
    }
  }
  return cfg;
}

// Random streams per purpose, so commands stay reproducible independently.
enum Stream : std::uint64_t { data_stream = 1, heldout_stream = 2, work_stream = 3 };

Dataset raw_dataset(const RunConfig& cfg, std::uint64_t stream = data_stream) {
  if (!cfg.dataset_path.empty()) {
    if (!fs::exists(cfg.dataset_path)) throw Error("io", "dataset file '" + cfg.dataset_path + "' not found");
    return load_csv(cfg.dataset_path, {cfg.csv_header, cfg.csv_charges});
  }
  Rng rng(cfg.seed, stream);
  return generate_toy(parse_toy_name(cfg.dataset), cfg.dataset_count, rng);
}

struct Prepared {
  Dataset data;  // centered when cfg.center
  Vec offset;    // add back to map model space to data space
  ResolvedRun run;
};

Prepared prepare(const RunConfig& cfg) {
  Prepared p;
  const Dataset raw = raw_dataset(cfg);
  if (raw.empty()) throw DomainError("dataset is empty");
  p.offset = cfg.center ? mean(raw) : Vec::Zero(raw.dim());
  p.data = cfg.center ? center(raw) : raw;
  p.run = resolve(cfg, stats(p.data), p.data.dim());
  return p;
}

class Run {
 public:
  Run(std::string command, const RunConfig& cfg) : command_(std::move(command)), dir_(cfg.out), cfg_(cfg) {
    fs::create_directories(dir_);
    start_ = std::chrono::steady_clock::now();
  }

  std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream out(path(name), std::ios::binary);
    if (!out) throw Error("io", "cannot write '" + path(name) + "'");
    out << text;
  }

  json manifest;

  void finish(const ResolvedRun* resolved) {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const RunConfig& c = resolved ? resolved->config : cfg_;
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(c)));
    manifest["command"] = command_;
    manifest["version"] = PFGM_VERSION;
    manifest["seed"] = c.seed;
    manifest["config_hash"] = hash;
    manifest["wall_time_seconds"] = wall;
    manifest["config"] = config_to_text(c);
    if (resolved) {
      manifest["derivations"] = {{"mean_sq_norm", resolved->stats.mean_sq_norm},
                                 {"max_norm", resolved->stats.max_norm},
                                 {"rule_M", resolved->rule_M},
                                 {"rule_z_max", resolved->rule_z_max},
                                 {"rule_norm_clip", resolved->rule_norm_clip},
                                 {"M", resolved->config.M},
                                 {"z_max", resolved->config.z_max},
                                 {"norm_clip", resolved->config.norm_clip}};
    }
    write("manifest.json", manifest.dump(2) + "\n");
    write("config.txt", config_to_text(c));
  }

 private:
  std::string command_;
  std::string dir_;
  RunConfig cfg_;
  std::chrono::steady_clock::time_point start_;
};

json nfe_stats(const std::vector<long>& nfe) {
  if (nfe.empty()) return {{"count", 0}};
  double sum = 0.0;
  for (long v : nfe) sum += static_cast<double>(v);
  return {{"count", nfe.size()},
          {"mean", sum / static_cast<double>(nfe.size())},
          {"min", *std::min_element(nfe.begin(), nfe.end())},
          {"max", *std::max_element(nfe.begin(), nfe.end())}};
}

std::string rows_csv(const std::vector<Vec>& rows) {
  std::ostringstream o;
  o.precision(17);
  for (const auto& r : rows) {
    for (Eigen::Index j = 0; j < r.size(); ++j) o << (j ? "," : "") << r[j];
    o << "\n";
  }
  return o.str();
}

Vec parse_vector(const std::string& text) {
  const Dataset d = parse_csv(text);
  if (d.size() != 1) throw ParseError("expected one comma-separated vector, got '" + text + "'", 1);
  return d.point(0);
}

// The model a sampling-type command runs on: a checkpoint or the exact field.
struct ModelChoice {
  std::unique_ptr<FieldModel> model;
  std::string kind;
};

ModelChoice choose_model(const Flags& f, const Prepared& p) {
  if (f.exact == f.checkpoint.has_value())
    throw DomainError("choose exactly one of --exact or --checkpoint");
  if (f.exact) return {std::make_unique<ExactFieldModel>(p.data, p.run.config.gamma), "exact"};
  if (!fs::exists(*f.checkpoint)) throw Error("missing_checkpoint", "checkpoint '" + *f.checkpoint + "' not found");
  Checkpoint ck = load_checkpoint(*f.checkpoint);
  if (ck.ema.input_dim() != p.data.dim() + 1)
    throw DimensionError("checkpoint expects data dimension " + std::to_string(ck.ema.input_dim() - 1) +
                         ", dataset has " + std::to_string(p.data.dim()));
  return {std::make_unique<NeuralFieldModel>(ck.model()), "neural"};
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const Flags& f, const std::optional<std::string>& name) {
  RunConfig cfg = build_config(f);
  if (name) {
    cfg.dataset = *name;
    cfg.dataset_path.clear();
  }
  if (f.count) cfg.dataset_count = *f.count;
  Run run("gen-data", cfg);
  const Dataset d = raw_dataset(cfg);
  run.write("data.csv", format_csv(d));
  const auto s = stats(d);
  run.manifest["dataset"] = {{"name", cfg.dataset}, {"count", d.size()}, {"mean_sq_norm", s.mean_sq_norm},
                             {"max_norm", s.max_norm}};
  run.finish(nullptr);
  return ok;
}

int cmd_train(const Flags& f) {
  const RunConfig cfg = build_config(f);
  const Prepared p = prepare(cfg);
  Run run("train", p.run.config);
  auto res = train(p.data, p.run.perturb, p.run.train);
  Checkpoint ck{res.raw, res.ema, p.run.perturb, p.run.train, res.state.step};
  save_checkpoint(ck, run.path("checkpoint.json"));
  std::ostringstream loss;
  loss.precision(10);
  loss << "record,loss\n";
  for (std::size_t i = 0; i < res.state.loss_history.size(); ++i) loss << i << "," << res.state.loss_history[i] << "\n";
  run.write("loss.csv", loss.str());
  run.manifest["train"] = {{"steps", res.state.step},
                           {"final_loss", res.state.loss_history.empty() ? 0.0 : res.state.loss_history.back()},
                           {"parameters", res.ema.parameter_count()}};
  run.finish(&p.run);
  return ok;
}

int cmd_sample(const Flags& f) {
  const RunConfig cfg = build_config(f);
  const Prepared p = prepare(cfg);
  const auto m = choose_model(f, p);
  Run run("sample", p.run.config);
  OdeConfig ode = p.run.ode;
  ode.record = false;
  Rng rng(cfg.seed, work_stream);
  const auto gen = generate_samples(*m.model, ode, cfg.count, rng, p.run.prior.norm_clip);
  std::vector<Vec> rows;
  for (Eigen::Index i = 0; i < gen.samples.rows(); ++i) rows.push_back(gen.samples.row(i).transpose() + p.offset);
  run.write("samples.csv", rows_csv(rows));
  run.manifest["model"] = m.kind;
  run.manifest["samples"] = rows.size();
  run.manifest["failures"] = gen.failures;
  run.manifest["nfe"] = nfe_stats(gen.nfe);
  run.finish(&p.run);
  return ok;
}

int cmd_likelihood(const Flags& f, const std::optional<std::string>& points_path) {
  const RunConfig cfg = build_config(f);
  const Prepared p = prepare(cfg);
  const auto m = choose_model(f, p);
  Run run("likelihood", p.run.config);

  Dataset points;
  if (points_path) {
    points = load_csv(*points_path);
  } else if (cfg.dataset_path.empty()) {
    RunConfig held = cfg;
    held.dataset_count = cfg.count;
    points = raw_dataset(held, heldout_stream);
  } else {
    points = raw_dataset(cfg);
  }
  if (points.dim() != p.data.dim()) throw DimensionError("points and dataset dimensions differ");

  const auto method = parse_divergence_method(cfg.divergence);
  Rng rng(cfg.seed, work_stream);
  std::ostringstream csv;
  csv.precision(12);
  csv << "index,log_density,bits_per_dim,nfe,status\n";
  std::vector<long> nfe;
  double sum_bpd = 0.0;
  std::size_t good = 0;
  const std::size_t n = std::min(points.size(), cfg.count);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec x = points.point(i) - p.offset;
    const auto r = log_likelihood(x, *m.model, p.run.ode, method, &rng, cfg.probes);
    nfe.push_back(r.nfe);
    if (r.status == RunStatus::ok) {
      sum_bpd += r.bits_per_dim;
      ++good;
    }
    csv << i << "," << r.log_density << "," << r.bits_per_dim << "," << r.nfe << "," << to_string(r.status) << "\n";
  }
  run.write("likelihood.csv", csv.str());
  run.manifest["model"] = m.kind;
  run.manifest["points"] = n;
  run.manifest["failures"] = n - good;
  run.manifest["mean_bits_per_dim"] = good ? sum_bpd / static_cast<double>(good) : 0.0;
  run.manifest["divergence"] = to_string(method);
  run.manifest["nfe"] = nfe_stats(nfe);
  run.finish(&p.run);
  return ok;
}

int cmd_verify(const Flags& f) {
  const RunConfig cfg = build_config(f);
  const Prepared p = prepare(cfg);
  Run run("verify", p.run.config);
  const std::string suite = cfg.suite;
  static const std::vector<std::string> known = {"all", "theorem1", "backward", "hit", "tree"};
  if (std::find(known.begin(), known.end(), suite) == known.end())
    throw DomainError("unknown suite '" + suite + "' (all, theorem1, backward, hit, tree)");
  const auto want = [&](const char* s) { return suite == "all" || suite == s; };

  json reports = json::array();
  bool all_pass = true;
  const auto add = [&](const TestReport& r) {
    reports.push_back(to_json(r));
    all_pass = all_pass && r.pass;
  };
  Rng rng(cfg.seed, work_stream);

  if (want("theorem1")) {
    Rng r = rng.split(1);
    add(theorem1_uniformity(p.data, 1e3 * std::max(p.run.stats.max_norm, 1e-12), cfg.count, r));
  }
  if (want("backward")) {
    Dataset train_d = p.data, held;
    if (cfg.dataset_path.empty()) {
      RunConfig hc = cfg;
      hc.dataset_count = std::max<std::size_t>(cfg.dataset_count, 2 * cfg.count);
      const Dataset h = raw_dataset(hc, heldout_stream);
      held = Dataset(Mat(h.points().rowwise() - p.offset.transpose()));
    } else {
      std::vector<std::size_t> a, b;
      for (std::size_t i = 0; i < p.data.size(); ++i) (i % 2 ? b : a).push_back(i);
      train_d = p.data.subset(a);
      held = p.data.subset(b);
    }
    Rng r = rng.split(2);
    BackwardRecoveryOptions o;
    o.energy_subset = std::min(cfg.count, held.size() / 2);
    o.norm_clip = p.run.prior.norm_clip;
    OdeConfig ode = p.run.ode;
    ode.record = false;
    add(backward_recovery(train_d, held, ode, cfg.count, r, o).report);
  }
  if (want("hit")) {
    Mat pts(2, 3);
    pts << -1, 0, 0, 1, 0, 0;
    Vec q(2);
    q << 1, 3;
    Rng r = rng.split(3);
    add(hit_probability_test(Dataset(pts, q), cfg.count, 1e3, 1e-3, 0.015 * std::sqrt(1e4 / cfg.count), r));
  }
  if (want("tree")) {
    std::vector<AugmentedPoint> qs;
    Rng r = rng.split(4);
    const double msq = p.run.stats.mean_sq_norm;
    const int n = p.data.dim();
    for (int i = 0; i < 100; ++i) {
      Vec u = sample_unit_sphere(n, r);
      u[n] = std::abs(u[n]);
      const double k = std::exp(r.uniform() * std::log(1000.0));
      qs.push_back(AugmentedPoint::split(std::sqrt(k * std::sqrt(double(n)) * msq / 2.0) * u));
    }
    add(tree_fidelity_test(p.data, qs, 0.5, 16, 1e-3));
  }

  json report = {{"suite", suite}, {"pass", all_pass}, {"reports", reports}};
  run.write("report.json", report.dump(2) + "\n");
  run.manifest["pass"] = all_pass;
  run.finish(&p.run);
  std::cout << report.dump(2) << "\n";
  return all_pass ? ok : verification_failed;
}

int cmd_interpolate(const Flags& f, const std::optional<std::string>& from, const std::optional<std::string>& to,
                    int frames) {
  const RunConfig cfg = build_config(f);
  const Prepared p = prepare(cfg);
  const auto m = choose_model(f, p);
  Run run("interpolate", p.run.config);
  const Vec a = from ? Vec(parse_vector(*from) - p.offset) : p.data.point(0);
  const Vec b = to ? Vec(parse_vector(*to) - p.offset) : p.data.point(1);
  if (a.size() != p.data.dim() || b.size() != p.data.dim()) throw DimensionError("endpoint dimension mismatch");
  const auto path = interpolate(a, b, frames, *m.model, p.run.ode);
  std::vector<Vec> rows;
  for (std::size_t k = 0; k < path.points.size(); ++k) {
    Vec row(2 * a.size());
    row << path.points[k] + p.offset, path.latents[k];
    rows.push_back(row);
  }
  run.write("interpolation.csv", rows_csv(rows));
  run.manifest["model"] = m.kind;
  run.manifest["frames"] = frames;
  run.finish(&p.run);
  return ok;
}

int cmd_field_eval(const Flags& f, const std::vector<std::string>& queries, const std::optional<std::string>& file,
                   double theta) {
  const RunConfig cfg = build_config(f);
  const Prepared p = prepare(cfg);
  Run run("field-eval", p.run.config);
  std::vector<Vec> q;
  for (const auto& s : queries) q.push_back(parse_vector(s));
  if (file) {
    const Dataset d = load_csv(*file);
    for (std::size_t i = 0; i < d.size(); ++i) q.push_back(d.point(i));
  }
  if (q.empty()) throw DomainError("no queries: pass --query x1,...,xN,z or --queries file.csv");
  const int n = p.data.dim();
  std::optional<TreeCode> tree;
  if (theta > 0.0) tree.emplace(build_tree(p.data, 16, theta));
  std::ostringstream csv;
  csv.precision(15);
  for (int j = 0; j < n; ++j) csv << "v" << j << ",";
  csv << "v_z,kappa,zone\n";
  for (const Vec& raw : q) {
    if (raw.size() != n + 1) throw DimensionError("query needs N + 1 = " + std::to_string(n + 1) + " coordinates");
    AugmentedPoint a = AugmentedPoint::split(raw);
    a.x -= p.offset;
    const Vec v = tree ? normalize(tree_empirical_field(a, *tree), n, p.run.config.gamma).v
                       : normalized_field(a, p.data, p.run.config.gamma).v;
    const double k = kappa(a.joined().norm(), p.run.stats.mean_sq_norm, n);
    for (Eigen::Index j = 0; j < v.size(); ++j) csv << v[j] << ",";
    csv << k << "," << to_string(kappa_zone(k)) << "\n";
  }
  run.write("field.csv", csv.str());
  run.manifest["queries"] = q.size();
  run.manifest["tree_theta"] = theta;
  run.finish(&p.run);
  return ok;
}

void print_error(const std::string& code, const std::string& message, int exit) {
  std::cerr << json{{"error", code}, {"message", message}, {"exit_code", exit}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Poisson flow generative models at desk scale"};
  app.set_version_flag("--version", PFGM_VERSION);
  app.require_subcommand(1);

  Flags f;
  std::optional<std::string> name, points, from, to, queries_file;
  std::vector<std::string> queries;
  int frames = 8;
  double theta = 0.0;

  auto* gen = app.add_subcommand("gen-data", "generate a toy dataset as CSV");
  add_common(gen, f);
  gen->add_option("--name", name, "toy name");

  auto* tr = app.add_subcommand("train", "train the field network");
  add_common(tr, f);

  auto* sa = app.add_subcommand("sample", "draw samples by the backward ODE");
  add_common(sa, f);
  add_model(sa, f);

  auto* li = app.add_subcommand("likelihood", "log-likelihood and bits/dim by the forward ODE");
  add_common(li, f);
  add_model(li, f);
  li->add_option("--points", points, "CSV of points to evaluate");

  auto* ve = app.add_subcommand("verify", "run verification suites");
  add_common(ve, f);
  ve->add_option("--suite", f.suite, "all, theorem1, backward, hit or tree");

  auto* in = app.add_subcommand("interpolate", "latent interpolation between two points");
  add_common(in, f);
  add_model(in, f);
  in->add_option("--from", from, "first endpoint x1,...,xN");
  in->add_option("--to", to, "second endpoint x1,...,xN");
  in->add_option("--frames", frames, "number of interpolation frames")->check(CLI::PositiveNumber);

  auto* fe = app.add_subcommand("field-eval", "evaluate the normalized empirical field");
  add_common(fe, f);
  fe->add_option("--query", queries, "augmented point x1,...,xN,z (repeatable)");
  fe->add_option("--queries", queries_file, "CSV of augmented points");
  fe->add_option("--theta", theta, "tree-code opening angle; 0 sums exactly");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what(), usage);
    return usage;
  }

  try {
    if (*gen) return cmd_gen_data(f, name);
    if (*tr) return cmd_train(f);
    if (*sa) return cmd_sample(f);
    if (*li) return cmd_likelihood(f, points);
    if (*ve) return cmd_verify(f);
    if (*in) return cmd_interpolate(f, from, to, frames);
    if (*fe) return cmd_field_eval(f, queries, queries_file, theta);
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    print_error(e.code(), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    print_error("internal", e.what(), internal);
    return internal;
  }
  return internal;
}
