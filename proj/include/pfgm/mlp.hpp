#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "pfgm/geometry.hpp"

namespace pfgm {

enum class Activation { silu, tanh };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

// Fully connected network with a smooth activation on hidden layers and a
// linear output layer. All weights live in one flat parameter vector; layer
// l stores W_l (out x in, column-major) followed by b_l.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> widths, Activation act);

  static Mlp initialized(std::vector<int> widths, Activation act, Rng& rng);

  const std::vector<int>& widths() const { return widths_; }
  Activation activation() const { return act_; }
  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  std::size_t layer_count() const { return widths_.size() - 1; }
  Eigen::Index parameter_count() const { return params_.size(); }

  const Vec& params() const { return params_; }
  Vec& params() { return params_; }
  void set_params(const Vec& p);

  Eigen::Map<const Mat> weight(std::size_t layer) const;
  Eigen::Map<const Vec> bias(std::size_t layer) const;

  Vec forward(const Vec& input) const;
  // Inputs one per column; outputs one per column.
  Mat forward_batch(const Mat& inputs) const;

  // d output / d input, output_dim x input_dim.
  Mat input_jacobian(const Vec& input) const;

  // Mean over columns of |f(input) - target|^2, and its parameter gradient.
  struct LossGrad {
    double loss = 0.0;
    Vec grad;
  };
  LossGrad loss_and_gradient(const Mat& inputs, const Mat& targets) const;
  double loss(const Mat& inputs, const Mat& targets) const;

 private:
  std::vector<Eigen::Index> offsets_;  // start of W_l in params_
  std::vector<int> widths_;
  Activation act_ = Activation::silu;
  Vec params_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(AdamConfig cfg, Eigen::Index size);

  void step(Vec& params, const Vec& grad);

  const AdamConfig& config() const { return cfg_; }
  long steps() const { return t_; }
  const Vec& first_moment() const { return m_; }
  const Vec& second_moment() const { return v_; }

 private:
  AdamConfig cfg_;
  Vec m_, v_;
  long t_ = 0;
};

}  // namespace pfgm
