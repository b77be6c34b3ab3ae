#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace specshape::nn {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Activation : std::uint8_t { linear, elu };

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
/// d/dx elu(x)
inline double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

struct LayerShape {
  int inputs = 0;
  int outputs = 0;
  Activation activation = Activation::linear;
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

/// Flat vector of partials, laid out exactly like DenseNet::parameters().
using Gradient = Eigen::VectorXd;

/// Fully connected network. All parameters live in one flat vector; layer l
/// owns an (outputs x inputs) column-major weight block followed by its bias.
/// Batched calls take one sample per column.
class DenseNet {
 public:
  using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
  using VectorMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

  /// Activations and pre-activations recorded by a forward pass, for backward.
  struct Tape {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
  };

  DenseNet() = default;
  /// All parameters zero.
  explicit DenseNet(std::vector<LayerShape> layers);

  /// Uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static DenseNet init(std::vector<LayerShape> layers, std::uint64_t seed);
  /// sizes = {in, hidden..., out}; ELU on hidden layers, linear output.
  static DenseNet mlp(std::span<const int> sizes, std::uint64_t seed);

  int input_size() const;
  int output_size() const;
  Eigen::Index parameter_count() const { return params_.size(); }
  std::span<const LayerShape> layers() const { return layers_; }

  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }

  MatrixMap weights(std::size_t layer);
  ConstMatrixMap weights(std::size_t layer) const;
  VectorMap bias(std::size_t layer);
  ConstVectorMap bias(std::size_t layer) const;

  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs, Tape& tape) const;

  /// Gradient of a scalar loss given dL/d(output) for the batch recorded in
  /// `tape`. If `input_grad` is non-null it receives dL/d(input).
  Gradient backward(const Tape& tape, const Eigen::MatrixXd& output_grad,
                    Eigen::MatrixXd* input_grad = nullptr) const;

  void save(std::ostream& out) const;
  static DenseNet load(std::istream& in);

  friend bool operator==(const DenseNet& a, const DenseNet& b) {
    return a.layers_ == b.layers_ && a.params_ == b.params_;
  }

 private:
  std::vector<LayerShape> layers_;
  std::vector<Eigen::Index> offsets_;  // weight block start per layer
  Eigen::VectorXd params_;
};

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// ADAM with bias correction over a flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index size, AdamOptions options = {});

  void step(Eigen::VectorXd& params, const Gradient& grad);
  /// Zeroes both moment accumulators and the step counter.
  void reset();

  const AdamOptions& options() const { return options_; }
  std::int64_t steps() const { return steps_; }
  const Eigen::VectorXd& first_moment() const { return m_; }
  const Eigen::VectorXd& second_moment() const { return v_; }
  bool moments_zero() const { return steps_ == 0 && m_.isZero(0.0) && v_.isZero(0.0); }

  void save(std::ostream& out) const;
  static Adam load(std::istream& in);

 private:
  AdamOptions options_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  std::int64_t steps_ = 0;
};

/// A network together with its optimizer.
struct TrainableNet {
  DenseNet net;
  Adam optimizer;

  TrainableNet() = default;
  TrainableNet(DenseNet n, AdamOptions options)
      : net(std::move(n)), optimizer(net.parameter_count(), options) {}
  void apply(const Gradient& grad) { optimizer.step(net.parameters(), grad); }
};

}  // namespace specshape::nn
