#include "specshape/nn.hpp"

#include <cmath>
#include <random>
#include <string>

#include "binio.hpp"

namespace specshape::nn {

namespace {

void apply_activation(Activation act, const Eigen::MatrixXd& pre, Eigen::MatrixXd& out) {
  if (act == Activation::linear) {
    out = pre;
  } else {
    out = pre.unaryExpr([](double x) { return elu(x); });
  }
}

}  // namespace

DenseNet::DenseNet(std::vector<LayerShape> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("network needs at least one layer");
  Eigen::Index total = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& s = layers_[l];
    if (s.inputs < 1 || s.outputs < 1) throw ShapeError("layer sizes must be positive");
    if (l > 0 && layers_[l - 1].outputs != s.inputs)
      throw ShapeError("layer " + std::to_string(l) + " input does not match previous output");
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(s.inputs) * s.outputs + s.outputs;
  }
  params_ = Eigen::VectorXd::Zero(total);
}

DenseNet DenseNet::init(std::vector<LayerShape> layers, std::uint64_t seed) {
  DenseNet net(std::move(layers));
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < net.layers_.size(); ++l) {
    const auto& s = net.layers_[l];
    const double bound = std::sqrt(6.0 / static_cast<double>(s.inputs + s.outputs));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = net.weights(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
  }
  return net;
}

DenseNet DenseNet::mlp(std::span<const int> sizes, std::uint64_t seed) {
  if (sizes.size() < 2) throw ShapeError("mlp needs at least input and output sizes");
  std::vector<LayerShape> layers;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const bool last = i + 2 == sizes.size();
    layers.push_back({sizes[i], sizes[i + 1], last ? Activation::linear : Activation::elu});
  }
  return init(std::move(layers), seed);
}

int DenseNet::input_size() const { return layers_.empty() ? 0 : layers_.front().inputs; }
int DenseNet::output_size() const { return layers_.empty() ? 0 : layers_.back().outputs; }

DenseNet::MatrixMap DenseNet::weights(std::size_t l) {
  const auto& s = layers_.at(l);
  return MatrixMap(params_.data() + offsets_[l], s.outputs, s.inputs);
}

DenseNet::ConstMatrixMap DenseNet::weights(std::size_t l) const {
  const auto& s = layers_.at(l);
  return ConstMatrixMap(params_.data() + offsets_[l], s.outputs, s.inputs);
}

DenseNet::VectorMap DenseNet::bias(std::size_t l) {
  const auto& s = layers_.at(l);
  return VectorMap(params_.data() + offsets_[l] + static_cast<Eigen::Index>(s.inputs) * s.outputs,
                   s.outputs);
}

DenseNet::ConstVectorMap DenseNet::bias(std::size_t l) const {
  const auto& s = layers_.at(l);
  return ConstVectorMap(
      params_.data() + offsets_[l] + static_cast<Eigen::Index>(s.inputs) * s.outputs, s.outputs);
}

Eigen::VectorXd DenseNet::forward(const Eigen::VectorXd& input) const {
  return forward_batch(input);
}

Eigen::MatrixXd DenseNet::forward_batch(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != input_size())
    throw ShapeError("input has " + std::to_string(inputs.rows()) + " rows, network expects " +
                     std::to_string(input_size()));
  Eigen::MatrixXd x = inputs;
  Eigen::MatrixXd pre;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    pre.noalias() = weights(l) * x;
    pre.colwise() += bias(l);
    apply_activation(layers_[l].activation, pre, x);
  }
  return x;
}

Eigen::MatrixXd DenseNet::forward_batch(const Eigen::MatrixXd& inputs, Tape& tape) const {
  if (inputs.rows() != input_size())
    throw ShapeError("input has " + std::to_string(inputs.rows()) + " rows, network expects " +
                     std::to_string(input_size()));
  tape.inputs.resize(layers_.size());
  tape.pre.resize(layers_.size());
  Eigen::MatrixXd x = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    tape.inputs[l] = x;
    auto& pre = tape.pre[l];
    pre.noalias() = weights(l) * x;
    pre.colwise() += bias(l);
    apply_activation(layers_[l].activation, pre, x);
  }
  return x;
}

Gradient DenseNet::backward(const Tape& tape, const Eigen::MatrixXd& output_grad,
                            Eigen::MatrixXd* input_grad) const {
  if (tape.pre.size() != layers_.size()) throw ShapeError("tape does not belong to this network");
  const Eigen::Index batch = tape.pre.back().cols();
  if (output_grad.rows() != output_size() || output_grad.cols() != batch)
    throw ShapeError("output gradient shape mismatch");

  Gradient grad = Gradient::Zero(params_.size());
  Eigen::MatrixXd upstream = output_grad;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& s = layers_[l];
    if (s.activation == Activation::elu)
      upstream.array() *= tape.pre[l].unaryExpr([](double x) { return elu_grad(x); }).array();
    MatrixMap gw(grad.data() + offsets_[l], s.outputs, s.inputs);
    VectorMap gb(grad.data() + offsets_[l] + static_cast<Eigen::Index>(s.inputs) * s.outputs,
                 s.outputs);
    gw.noalias() = upstream * tape.inputs[l].transpose();
    gb = upstream.rowwise().sum();
    if (l > 0 || input_grad) {
      Eigen::MatrixXd next = weights(l).transpose() * upstream;
      upstream = std::move(next);
    }
  }
  if (input_grad) *input_grad = std::move(upstream);
  return grad;
}

void DenseNet::save(std::ostream& out) const {
  binio::write_tag(out, "DNET", 1);
  binio::write<std::uint64_t>(out, layers_.size());
  for (const auto& s : layers_) {
    binio::write<std::int32_t>(out, s.inputs);
    binio::write<std::int32_t>(out, s.outputs);
    binio::write<std::uint8_t>(out, static_cast<std::uint8_t>(s.activation));
  }
  binio::write_eigen(out, params_);
}

DenseNet DenseNet::load(std::istream& in) {
  binio::expect_tag(in, "DNET", 1);
  const auto n = binio::read<std::uint64_t>(in);
  if (n == 0 || n > 64) throw binio::FormatError("implausible layer count");
  std::vector<LayerShape> layers;
  for (std::uint64_t i = 0; i < n; ++i) {
    LayerShape s;
    s.inputs = binio::read<std::int32_t>(in);
    s.outputs = binio::read<std::int32_t>(in);
    const auto act = binio::read<std::uint8_t>(in);
    if (act > 1) throw binio::FormatError("unknown activation");
    s.activation = static_cast<Activation>(act);
    layers.push_back(s);
  }
  DenseNet net(std::move(layers));
  Eigen::VectorXd params = binio::read_eigen(in);
  if (params.size() != net.parameter_count()) throw binio::FormatError("parameter count mismatch");
  net.params_ = std::move(params);
  return net;
}

Adam::Adam(Eigen::Index size, AdamOptions options)
    : options_(options), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

void Adam::step(Eigen::VectorXd& params, const Gradient& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw ShapeError("optimizer state does not match parameter shape");
  ++steps_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  m_ = b1 * m_ + (1.0 - b1) * grad;
  v_ = b2 * v_ + (1.0 - b2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  params.array() -= options_.learning_rate * (m_.array() / c1) /
                    ((v_.array() / c2).sqrt() + options_.epsilon);
}

void Adam::reset() {
  m_.setZero();
  v_.setZero();
  steps_ = 0;
}

void Adam::save(std::ostream& out) const {
  binio::write_tag(out, "ADAM", 1);
  binio::write(out, options_);
  binio::write<std::int64_t>(out, steps_);
  binio::write_eigen(out, m_);
  binio::write_eigen(out, v_);
}

Adam Adam::load(std::istream& in) {
  binio::expect_tag(in, "ADAM", 1);
  Adam a;
  a.options_ = binio::read<AdamOptions>(in);
  a.steps_ = binio::read<std::int64_t>(in);
  a.m_ = binio::read_eigen(in);
  a.v_ = binio::read_eigen(in);
  if (a.m_.size() != a.v_.size()) throw binio::FormatError("moment size mismatch");
  return a;
}

}  // namespace specshape::nn
