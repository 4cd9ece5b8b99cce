#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pfgm/dataset.hpp"
#include "pfgm/field.hpp"
#include "pfgm/mlp.hpp"
#include "pfgm/perturb.hpp"

namespace pfgm {

// Anything that predicts the negative normalized field v at an augmented point.
class FieldModel {
 public:
  virtual ~FieldModel() = default;
  virtual Vec evaluate(const AugmentedPoint& q) const = 0;
  virtual int dim() const = 0;  // data dimension N
  virtual std::string kind() const = 0;
  // Whether v_z is exact, so the z-direction substitution must be skipped.
  virtual bool exact_z() const { return false; }
};

// The empirical normalized field of a dataset, optionally via the tree code.
class ExactFieldModel final : public FieldModel {
 public:
  ExactFieldModel(Dataset data, double gamma);
  ExactFieldModel(Dataset data, double gamma, std::size_t leaf_capacity, double theta);

  Vec evaluate(const AugmentedPoint& q) const override;
  int dim() const override { return data_.dim(); }
  std::string kind() const override { return tree_ ? "exact-tree" : "exact"; }
  bool exact_z() const override { return true; }

  const Dataset& data() const { return data_; }
  double gamma() const { return gamma_; }

 private:
  Dataset data_;
  double gamma_;
  std::shared_ptr<const TreeCode> tree_;
};

// Smooth radial compactification q / sqrt(rho^2 + |q|^2) applied to network
// inputs; rho <= 0 leaves inputs unchanged. Bounded inputs let the network
// cover the heavy-tailed prior far beyond the perturbation range.
Vec compactify(const Vec& q, double rho);
Mat compactify_columns(const Mat& q, double rho);

class NeuralFieldModel final : public FieldModel {
 public:
  explicit NeuralFieldModel(Mlp mlp, double input_scale = 0.0);

  Vec evaluate(const AugmentedPoint& q) const override;
  int dim() const override { return mlp_.input_dim() - 1; }
  std::string kind() const override { return "neural"; }

  const Mlp& mlp() const { return mlp_; }
  double input_scale() const { return input_scale_; }

 private:
  Mlp mlp_;
  double input_scale_;
};

struct TrainConfig {
  std::vector<int> hidden = {128, 128, 128};
  Activation activation = Activation::silu;
  AdamConfig adam;
  int iterations = 5000;
  std::size_t batch = 128;
  std::size_t large_batch = 2048;
  double ema_decay = 0.999;
  std::uint64_t seed = 0;
  int log_every = 0;  // record loss history every k steps (0: every step)
  double input_scale = 0.0;  // rho for compactify(); 0 feeds raw coordinates
};

struct TrainState {
  long step = 0;
  Adam optimizer;
  double ema_decay = 0.999;
  Vec ema_params;
  std::vector<double> loss_history;
};

struct TrainHooks {
  // Called with the large batch every time regression targets are computed.
  std::function<void(const Dataset& large_batch)> on_targets;
  // Called after each optimizer step.
  std::function<void(long step, const Mlp& raw, const TrainState& state)> on_step;
};

struct TrainResult {
  Mlp raw;
  Mlp ema;
  TrainState state;
  double input_scale = 0.0;
  NeuralFieldModel model() const { return NeuralFieldModel(ema, input_scale); }
};

TrainResult train(const Dataset& d, const PerturbConfig& cfg, const TrainConfig& train_cfg,
                  const TrainHooks& hooks = {});

// Perturbed points (rows, augmented) and their targets against `sources`.
struct RegressionBatch {
  Mat inputs;   // (N+1) x count
  Mat targets;  // (N+1) x count
};
RegressionBatch make_regression_batch(const Dataset& points, const Dataset& sources, const PerturbConfig& cfg,
                                      std::size_t count, Rng& rng);

double loss(const FieldModel& model, const std::vector<AugmentedPoint>& points, const std::vector<Vec>& targets);

struct Checkpoint {
  Mlp raw;
  Mlp ema;
  PerturbConfig perturb;
  TrainConfig train;
  long step = 0;
  NeuralFieldModel model() const { return NeuralFieldModel(ema, train.input_scale); }
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
std::string checkpoint_to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const std::string& text);

}  // namespace pfgm
