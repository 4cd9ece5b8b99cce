#include "pfgm/mlp.hpp"

#include <cmath>

#include "pfgm/error.hpp"

namespace pfgm {

Activation parse_activation(std::string_view name) {
  if (name == "silu") return Activation::silu;
  if (name == "tanh") return Activation::tanh;
  throw DomainError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) { return a == Activation::silu ? "silu" : "tanh"; }

namespace {

double act_value(Activation a, double x) {
  if (a == Activation::tanh) return std::tanh(x);
  return x / (1.0 + std::exp(-x));
}

double act_derivative(Activation a, double x) {
  if (a == Activation::tanh) {
    const double t = std::tanh(x);
    return 1.0 - t * t;
  }
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

}  // namespace

Mlp::Mlp(std::vector<int> widths, Activation act) : widths_(std::move(widths)), act_(act) {
  if (widths_.size() < 2) throw DomainError("an Mlp needs at least input and output widths");
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    if (widths_[l] < 1 || widths_[l + 1] < 1) throw DomainError("layer widths must be positive");
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(widths_[l + 1]) * (widths_[l] + 1);
  }
  params_ = Vec::Zero(total);
}

Mlp Mlp::initialized(std::vector<int> widths, Activation act, Rng& rng) {
  Mlp m(std::move(widths), act);
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    const int fan_in = m.widths_[l];
    const double scale = std::sqrt(1.0 / fan_in);
    const Eigen::Index count = static_cast<Eigen::Index>(m.widths_[l + 1]) * fan_in;
    for (Eigen::Index k = 0; k < count; ++k) m.params_[m.offsets_[l] + k] = scale * rng.normal();
  }
  return m;
}

void Mlp::set_params(const Vec& p) {
  if (p.size() != params_.size()) throw DimensionError("parameter vector has the wrong length");
  params_ = p;
}

Eigen::Map<const Mat> Mlp::weight(std::size_t l) const {
  return {params_.data() + offsets_[l], widths_[l + 1], widths_[l]};
}

Eigen::Map<const Vec> Mlp::bias(std::size_t l) const {
  return {params_.data() + offsets_[l] + static_cast<Eigen::Index>(widths_[l + 1]) * widths_[l], widths_[l + 1]};
}

Vec Mlp::forward(const Vec& input) const {
  if (input.size() != input_dim()) throw DimensionError("Mlp input has the wrong dimension");
  Vec h = input;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    Vec a = weight(l) * h + bias(l);
    if (l + 1 < layer_count()) a = a.unaryExpr([this](double x) { return act_value(act_, x); });
    h = std::move(a);
  }
  return h;
}

Mat Mlp::forward_batch(const Mat& inputs) const {
  if (inputs.rows() != input_dim()) throw DimensionError("Mlp input has the wrong dimension");
  Mat h = inputs;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    Mat a = weight(l) * h;
    a.colwise() += bias(l);
    if (l + 1 < layer_count()) a = a.unaryExpr([this](double x) { return act_value(act_, x); });
    h = std::move(a);
  }
  return h;
}

Mat Mlp::input_jacobian(const Vec& input) const {
  if (input.size() != input_dim()) throw DimensionError("Mlp input has the wrong dimension");
  Vec h = input;
  Mat jac = Mat::Identity(input_dim(), input_dim());
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const Vec a = weight(l) * h + bias(l);
    jac = weight(l) * jac;
    if (l + 1 < layer_count()) {
      for (Eigen::Index i = 0; i < a.size(); ++i) jac.row(i) *= act_derivative(act_, a[i]);
      h = a.unaryExpr([this](double x) { return act_value(act_, x); });
    } else {
      h = a;
    }
  }
  return jac;
}

Mlp::LossGrad Mlp::loss_and_gradient(const Mat& inputs, const Mat& targets) const {
  if (inputs.rows() != input_dim() || targets.rows() != output_dim() || inputs.cols() != targets.cols())
    throw DimensionError("loss: inputs and targets do not match the network");
  if (inputs.cols() == 0) throw DomainError("loss: empty batch");
  const auto batch = static_cast<double>(inputs.cols());
  const std::size_t layers = layer_count();

  std::vector<Mat> pre(layers);
  std::vector<Mat> act(layers + 1);
  act[0] = inputs;
  for (std::size_t l = 0; l < layers; ++l) {
    pre[l] = weight(l) * act[l];
    pre[l].colwise() += bias(l);
    act[l + 1] = l + 1 < layers ? pre[l].unaryExpr([this](double x) { return act_value(act_, x); }) : pre[l];
  }
  const Mat residual = act[layers] - targets;

  LossGrad out;
  out.loss = residual.squaredNorm() / batch;
  out.grad = Vec::Zero(params_.size());
  Mat g = (2.0 / batch) * residual;
  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::Index rows = widths_[l + 1];
    const Eigen::Index cols = widths_[l];
    Eigen::Map<Mat>(out.grad.data() + offsets_[l], rows, cols) = g * act[l].transpose();
    Eigen::Map<Vec>(out.grad.data() + offsets_[l] + rows * cols, rows) = g.rowwise().sum();
    if (l > 0) {
      Mat back = weight(l).transpose() * g;
      g = back.cwiseProduct(pre[l - 1].unaryExpr([this](double x) { return act_derivative(act_, x); }));
    }
  }
  return out;
}

double Mlp::loss(const Mat& inputs, const Mat& targets) const {
  if (targets.rows() != output_dim() || inputs.cols() != targets.cols())
    throw DimensionError("loss: inputs and targets do not match the network");
  return (forward_batch(inputs) - targets).squaredNorm() / static_cast<double>(inputs.cols());
}

Adam::Adam(AdamConfig cfg, Eigen::Index size) : cfg_(cfg), m_(Vec::Zero(size)), v_(Vec::Zero(size)) {}

void Adam::step(Vec& params, const Vec& grad) {
  if (grad.size() != m_.size() || params.size() != m_.size()) throw DimensionError("Adam: size mismatch");
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  params.array() -= cfg_.lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.eps);
}

}  // namespace pfgm
