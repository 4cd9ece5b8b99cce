#include "pfgm/model.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pfgm/error.hpp"

namespace pfgm {

using nlohmann::json;

ExactFieldModel::ExactFieldModel(Dataset data, double gamma) : data_(std::move(data)), gamma_(gamma) {
  if (data_.empty()) throw DomainError("exact field model needs data");
  if (gamma < 0.0) throw DomainError("gamma must be nonnegative");
}

ExactFieldModel::ExactFieldModel(Dataset data, double gamma, std::size_t leaf_capacity, double theta)
    : ExactFieldModel(std::move(data), gamma) {
  tree_ = std::make_shared<const TreeCode>(data_, leaf_capacity, theta);
}

Vec ExactFieldModel::evaluate(const AugmentedPoint& q) const {
  if (tree_) return normalize(tree_empirical_field(q, *tree_), data_.dim(), gamma_).v;
  return normalized_field(q, data_, gamma_).v;
}

Vec compactify(const Vec& q, double rho) {
  if (rho <= 0.0) return q;
  return q / std::sqrt(rho * rho + q.squaredNorm());
}

Mat compactify_columns(const Mat& q, double rho) {
  if (rho <= 0.0) return q;
  Mat out = q;
  for (Eigen::Index c = 0; c < q.cols(); ++c) out.col(c) /= std::sqrt(rho * rho + q.col(c).squaredNorm());
  return out;
}

NeuralFieldModel::NeuralFieldModel(Mlp mlp, double input_scale) : mlp_(std::move(mlp)), input_scale_(input_scale) {
  if (!(input_scale >= 0.0)) throw DomainError("input scale must be nonnegative");
  if (mlp_.input_dim() != mlp_.output_dim() || mlp_.input_dim() < 2)
    throw DimensionError("a field network maps R^(N+1) to R^(N+1)");
}

Vec NeuralFieldModel::evaluate(const AugmentedPoint& q) const {
  if (q.x.size() + 1 != mlp_.input_dim()) throw DimensionError("query dimension does not match the network");
  return mlp_.forward(compactify(q.joined(), input_scale_));
}

namespace {

// First `k` entries of `idx` become a uniform sample without replacement.
void partial_shuffle(std::vector<std::size_t>& idx, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
}

}  // namespace

RegressionBatch make_regression_batch(const Dataset& points, const Dataset& sources, const PerturbConfig& cfg,
                                      std::size_t count, Rng& rng) {
  const int aug = points.dim() + 1;
  RegressionBatch out{Mat(aug, static_cast<Eigen::Index>(count)), Mat(aug, static_cast<Eigen::Index>(count))};
  for (std::size_t k = 0; k < count; ++k) {
    const auto i = static_cast<std::size_t>(rng.below(points.size()));
    const AugmentedPoint y = perturb(points.point(i), cfg, rng);
    const auto col = static_cast<Eigen::Index>(k);
    out.inputs.col(col) = y.joined();
    out.targets.col(col) = normalized_field(y, sources, cfg.gamma).v;
  }
  return out;
}

TrainResult train(const Dataset& d, const PerturbConfig& cfg, const TrainConfig& tc, const TrainHooks& hooks) {
  cfg.validate();
  if (d.empty()) throw DomainError("train: empty dataset");
  if (tc.batch == 0 || tc.batch > tc.large_batch) throw DomainError("train: need 1 <= |B| <= |B_L|");
  if (tc.large_batch > d.size())
    throw DomainError("train: large batch (" + std::to_string(tc.large_batch) + ") exceeds dataset size (" +
                      std::to_string(d.size()) + ")");
  if (!(tc.ema_decay >= 0.0 && tc.ema_decay < 1.0)) throw DomainError("train: ema_decay must be in [0, 1)");
  if (!(tc.input_scale >= 0.0)) throw DomainError("train: input_scale must be nonnegative");
  if (tc.iterations < 0) throw DomainError("train: iterations must be nonnegative");

  const int aug = d.dim() + 1;
  Rng rng(tc.seed, 0x7472616eULL);
  std::vector<int> widths{aug};
  widths.insert(widths.end(), tc.hidden.begin(), tc.hidden.end());
  widths.push_back(aug);
  Mlp net = Mlp::initialized(widths, tc.activation, rng);

  TrainState state;
  state.optimizer = Adam(tc.adam, net.parameter_count());
  state.ema_decay = tc.ema_decay;
  state.ema_params = net.params();

  std::vector<std::size_t> idx(d.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto B = static_cast<Eigen::Index>(tc.batch);
  Mat inputs(aug, B), targets(aug, B);
  std::vector<std::size_t> large(tc.large_batch);

  for (int it = 0; it < tc.iterations; ++it) {
    partial_shuffle(idx, tc.large_batch, rng);
    std::copy_n(idx.begin(), tc.large_batch, large.begin());
    const Dataset large_batch = d.subset(large);
    if (hooks.on_targets) hooks.on_targets(large_batch);
    // B is the first |B| members of B_L.
    for (Eigen::Index k = 0; k < B; ++k) {
      const AugmentedPoint y = perturb(large_batch.point(static_cast<std::size_t>(k)), cfg, rng);
      inputs.col(k) = compactify(y.joined(), tc.input_scale);
      targets.col(k) = normalized_field(y, large_batch, cfg.gamma).v;
    }
    const auto lg = net.loss_and_gradient(inputs, targets);
    if (!std::isfinite(lg.loss)) throw NumericalError("train: non-finite loss at step " + std::to_string(it));
    state.optimizer.step(net.params(), lg.grad);
    state.ema_params = tc.ema_decay * state.ema_params + (1.0 - tc.ema_decay) * net.params();
    ++state.step;
    if (tc.log_every <= 1 || it % tc.log_every == 0) state.loss_history.push_back(lg.loss);
    if (hooks.on_step) hooks.on_step(state.step, net, state);
  }

  Mlp ema = net;
  ema.set_params(state.ema_params);
  return {std::move(net), std::move(ema), std::move(state), tc.input_scale};
}

double loss(const FieldModel& model, const std::vector<AugmentedPoint>& points, const std::vector<Vec>& targets) {
  if (points.size() != targets.size()) throw DimensionError("loss: points and targets differ in length");
  if (points.empty()) throw DomainError("loss: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) total += (model.evaluate(points[i]) - targets[i]).squaredNorm();
  return total / static_cast<double>(points.size());
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr int kCheckpointVersion = 1;

json vec_to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ck) {
  json p = {{"M", ck.perturb.M}, {"sigma", ck.perturb.sigma}, {"tau", ck.perturb.tau}, {"gamma", ck.perturb.gamma}};
  if (ck.perturb.small_eps_z_threshold) p["small_eps_z_threshold"] = *ck.perturb.small_eps_z_threshold;
  if (ck.perturb.capped_M) p["capped_M"] = *ck.perturb.capped_M;
  json j = {
      {"format", "pfgm-checkpoint"},
      {"version", kCheckpointVersion},
      {"data_dim", ck.raw.input_dim() - 1},
      {"widths", ck.raw.widths()},
      {"activation", std::string(to_string(ck.raw.activation()))},
      {"step", ck.step},
      {"perturb", p},
      {"train",
       {{"iterations", ck.train.iterations},
        {"batch", ck.train.batch},
        {"large_batch", ck.train.large_batch},
        {"ema_decay", ck.train.ema_decay},
        {"lr", ck.train.adam.lr},
        {"seed", ck.train.seed},
        {"input_scale", ck.train.input_scale}}},
      {"params", vec_to_json(ck.raw.params())},
      {"ema_params", vec_to_json(ck.ema.params())},
  };
  return j.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error("checkpoint", std::string("malformed checkpoint: ") + e.what());
  }
  try {
    if (j.at("format") != "pfgm-checkpoint") throw Error("checkpoint", "not a pfgm checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw Error("checkpoint", "unsupported checkpoint version " + j.at("version").dump());
    const auto widths = j.at("widths").get<std::vector<int>>();
    const auto act = parse_activation(j.at("activation").get<std::string>());
    Checkpoint ck;
    ck.raw = Mlp(widths, act);
    ck.raw.set_params(vec_from_json(j.at("params")));
    ck.ema = Mlp(widths, act);
    ck.ema.set_params(vec_from_json(j.at("ema_params")));
    if (j.at("data_dim").get<int>() + 1 != ck.raw.input_dim())
      throw DimensionError("checkpoint data_dim does not match network input");
    const auto& p = j.at("perturb");
    ck.perturb.M = p.at("M").get<int>();
    ck.perturb.sigma = p.at("sigma").get<double>();
    ck.perturb.tau = p.at("tau").get<double>();
    ck.perturb.gamma = p.at("gamma").get<double>();
    if (p.contains("small_eps_z_threshold")) ck.perturb.small_eps_z_threshold = p["small_eps_z_threshold"].get<double>();
    if (p.contains("capped_M")) ck.perturb.capped_M = p["capped_M"].get<int>();
    const auto& t = j.at("train");
    ck.train.iterations = t.at("iterations").get<int>();
    ck.train.batch = t.at("batch").get<std::size_t>();
    ck.train.large_batch = t.at("large_batch").get<std::size_t>();
    ck.train.ema_decay = t.at("ema_decay").get<double>();
    ck.train.adam.lr = t.at("lr").get<double>();
    ck.train.seed = t.at("seed").get<std::uint64_t>();
    ck.train.input_scale = t.value("input_scale", 0.0);
    ck.train.activation = act;
    ck.train.hidden.assign(widths.begin() + 1, widths.end() - 1);
    ck.step = j.at("step").get<long>();
    return ck;
  } catch (const json::exception& e) {
    throw Error("checkpoint", std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write checkpoint '" + path + "'");
  out << checkpoint_to_json(ck) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing_checkpoint", "cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace pfgm
