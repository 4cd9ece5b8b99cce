#include "pfgm/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "pfgm/error.hpp"

namespace pfgm {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    throw ParseError("bad value '" + std::string(v) + "' for " + std::string(key), 0);
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError("bad boolean '" + std::string(v) + "' for " + std::string(key), 0);
}

struct Field {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string fmt(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

template <class T>
Field number(T RunConfig::*m, std::string_view key) {
  return {[m, key](RunConfig& c, std::string_view v) { c.*m = parse_number<T>(key, v); },
          [m](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return fmt(c.*m);
            else
              return std::to_string(c.*m);
          }};
}

Field text(std::string RunConfig::*m) {
  return {[m](RunConfig& c, std::string_view v) { c.*m = std::string(v); },
          [m](const RunConfig& c) { return c.*m; }};
}

Field flag(bool RunConfig::*m, std::string_view key) {
  return {[m, key](RunConfig& c, std::string_view v) { c.*m = parse_bool(key, v); },
          [m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); }};
}

// Ordered so config_to_text is stable.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"dataset", text(&RunConfig::dataset)},
      {"dataset_count", number(&RunConfig::dataset_count, "dataset_count")},
      {"dataset_path", text(&RunConfig::dataset_path)},
      {"csv_header", flag(&RunConfig::csv_header, "csv_header")},
      {"csv_charges", flag(&RunConfig::csv_charges, "csv_charges")},
      {"center", flag(&RunConfig::center, "center")},
      {"seed", number(&RunConfig::seed, "seed")},
      {"out", text(&RunConfig::out)},
      {"count", number(&RunConfig::count, "count")},
      {"M", number(&RunConfig::M, "M")},
      {"sigma", number(&RunConfig::sigma, "sigma")},
      {"tau", number(&RunConfig::tau, "tau")},
      {"gamma", number(&RunConfig::gamma, "gamma")},
      {"hidden", text(&RunConfig::hidden)},
      {"activation", text(&RunConfig::activation)},
      {"lr", number(&RunConfig::lr, "lr")},
      {"iterations", number(&RunConfig::iterations, "iterations")},
      {"batch", number(&RunConfig::batch, "batch")},
      {"large_batch", number(&RunConfig::large_batch, "large_batch")},
      {"ema_decay", number(&RunConfig::ema_decay, "ema_decay")},
      {"input_scale", number(&RunConfig::input_scale, "input_scale")},
      {"z_min", number(&RunConfig::z_min, "z_min")},
      {"z_max", number(&RunConfig::z_max, "z_max")},
      {"norm_clip", number(&RunConfig::norm_clip, "norm_clip")},
      {"solver", text(&RunConfig::solver)},
      {"euler_steps", number(&RunConfig::euler_steps, "euler_steps")},
      {"atol", number(&RunConfig::atol, "atol")},
      {"rtol", number(&RunConfig::rtol, "rtol")},
      {"z_sub_threshold", number(&RunConfig::z_sub_threshold, "z_sub_threshold")},
      {"suite", text(&RunConfig::suite)},
      {"divergence", text(&RunConfig::divergence)},
      {"probes", number(&RunConfig::probes, "probes")},
  };
  return table;
}

}  // namespace

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(cfg, trim(value));
      return;
    }
  }
  throw ParseError("unknown config key '" + std::string(key) + "'", 0);
}

RunConfig parse_config(std::string_view text, RunConfig cfg) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("config line " + std::to_string(line_no) + ": expected key = value", line_no);
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ParseError& e) {
      throw ParseError("config line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

void apply_env_overrides(RunConfig& cfg) {
  for (const auto& [name, field] : fields()) {
    std::string env = "PFGM_";
    for (char c : name) env += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (const char* v = std::getenv(env.c_str())) field.set(cfg, trim(v));
  }
}

std::string config_to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + " = " + field.get(cfg) + "\n";
  return out;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : config_to_text(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<int> parse_widths(std::string_view text) {
  std::vector<int> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    out.push_back(parse_number<int>("hidden", trim(text.substr(0, comma))));
    if (out.back() < 1) throw ParseError("hidden widths must be positive", 0);
    if (comma == std::string_view::npos) break;
    text = text.substr(comma + 1);
  }
  return out;
}

ResolvedRun resolve(const RunConfig& cfg, const DatasetStats& stats, int dim) {
  ResolvedRun r;
  r.config = cfg;
  r.stats = stats;
  const double msq = std::max(stats.mean_sq_norm, 1e-300);
  r.rule_M = rule_of_thumb_M(msq, dim, cfg.sigma, cfg.tau);
  if (cfg.M <= 0) r.config.M = static_cast<int>(r.rule_M);
  const auto sched = rule_of_thumb_schedule(msq, dim, cfg.sigma, cfg.tau, r.config.M);
  r.rule_z_max = sched.z_max;
  r.rule_norm_clip = sched.norm_clip;
  if (cfg.z_max <= 0.0) r.config.z_max = sched.z_max;
  if (cfg.norm_clip == 0.0) r.config.norm_clip = sched.norm_clip;

  r.perturb.M = r.config.M;
  r.perturb.sigma = cfg.sigma;
  r.perturb.tau = cfg.tau;
  r.perturb.gamma = cfg.gamma;
  r.perturb.validate();

  r.train.hidden = parse_widths(cfg.hidden);
  r.train.activation = parse_activation(cfg.activation);
  r.train.adam.lr = cfg.lr;
  r.train.iterations = cfg.iterations;
  r.train.batch = cfg.batch;
  r.train.large_batch = cfg.large_batch;
  r.train.ema_decay = cfg.ema_decay;
  r.train.seed = cfg.seed;
  if (cfg.input_scale == 0.0) r.config.input_scale = std::sqrt(msq);
  r.train.input_scale = std::max(r.config.input_scale, 0.0);

  r.ode.z_min = cfg.z_min;
  r.ode.z_max = r.config.z_max;
  r.ode.solver = parse_solver(cfg.solver);
  r.ode.euler_steps = cfg.euler_steps;
  r.ode.rk45_atol = cfg.atol;
  r.ode.rk45_rtol = cfg.rtol;
  r.ode.z_sub_threshold = cfg.z_sub_threshold;
  r.ode.gamma = cfg.gamma;
  r.ode.validate();

  r.prior.z_max = r.config.z_max;
  r.prior.n = dim;
  if (r.config.norm_clip > 0.0) r.prior.norm_clip = r.config.norm_clip;
  return r;
}

}  // namespace pfgm
