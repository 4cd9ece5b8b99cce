#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "pfgm/dataset.hpp"
#include "pfgm/model.hpp"
#include "pfgm/ode.hpp"
#include "pfgm/perturb.hpp"
#include "pfgm/prior.hpp"

namespace pfgm {

// Everything a CLI run needs. Serialized as a flat `key = value` file; keys
// are the field names below. `auto` values are filled in by resolve().
struct RunConfig {
  // dataset: a toy generator name, or a CSV path when dataset_path is set
  std::string dataset = "disk";
  std::size_t dataset_count = 10000;
  std::string dataset_path;
  bool csv_header = false;
  bool csv_charges = false;
  bool center = true;

  std::uint64_t seed = 0;
  std::string out = "pfgm-out";
  std::size_t count = 1000;

  // perturbation; M = 0 means rule of thumb
  int M = 0;
  double sigma = 0.01;
  double tau = 0.03;
  double gamma = 5.0;

  // model and training
  std::string hidden = "128,128,128";
  std::string activation = "silu";
  double lr = 1e-3;
  int iterations = 5000;
  std::size_t batch = 128;
  std::size_t large_batch = 2048;
  double ema_decay = 0.999;
  // network input compactification radius; 0 = sqrt(E|x|^2), negative = off
  double input_scale = 0.0;

  // sampling; z_max = 0 and norm_clip = 0 mean rule of thumb, norm_clip < 0 disables clipping
  double z_min = 1e-3;
  double z_max = 0.0;
  double norm_clip = 0.0;
  std::string solver = "rk45";
  int euler_steps = 100;
  double atol = 1e-4;
  double rtol = 1e-4;
  double z_sub_threshold = 0.1;

  std::string suite = "all";
  std::string divergence = "exact_fd";
  int probes = 1;
};

// Parses `key = value` lines ('#' starts a comment). Unknown keys and bad
// values throw ParseError with the line number.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

// Applies one override; throws ParseError(row 0) on unknown keys.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

// Overrides from environment variables PFGM_<KEY> (upper case).
void apply_env_overrides(RunConfig& cfg);

std::string config_to_text(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);

struct ResolvedRun {
  RunConfig config;  // with M, z_max, norm_clip filled in
  PerturbConfig perturb;
  TrainConfig train;
  OdeConfig ode;
  PriorSpec prior;
  DatasetStats stats;
  // Derivations for the manifest.
  double rule_M = 0.0;
  double rule_z_max = 0.0;
  double rule_norm_clip = 0.0;
};

ResolvedRun resolve(const RunConfig& cfg, const DatasetStats& stats, int dim);

std::vector<int> parse_widths(std::string_view text);

}  // namespace pfgm
