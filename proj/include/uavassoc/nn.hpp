#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "uavassoc/common.hpp"

namespace uavassoc::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { Linear, Tanh, Relu };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct LayerSpec {
  int units = 0;
  Activation activation = Activation::Linear;
};

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
  Activation activation = Activation::Linear;

  int inputs() const { return static_cast<int>(weights.cols()); }
  int outputs() const { return static_cast<int>(weights.rows()); }
};

/// Per-layer gradients, same shapes as the network's parameters.
struct Gradients {
  std::vector<Matrix> d_weights;
  std::vector<Vector> d_bias;

  void set_zero();
  double max_abs() const;
};

/// Post-activation values of every layer for one batch; input at index 0.
struct Tape {
  std::vector<Matrix> values;
};

/// Fully connected stack. Batches are column-major: one sample per column.
class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<DenseLayer> layers);

  /// Uniform init in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static DenseNet random(int inputs, std::span<const LayerSpec> layers, Rng& rng);

  int input_dim() const;
  int output_dim() const;
  std::size_t layer_count() const { return layers_.size(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  std::string topology() const;
  std::size_t parameter_count() const;

  Vector forward(const Vector& input) const;
  Matrix forward_batch(const Matrix& inputs) const;
  Matrix forward_batch(const Matrix& inputs, Tape& tape) const;

  /// Backpropagates `d_output` through the recorded batch; adds parameter
  /// gradients into `grads` and returns the gradient w.r.t. the input.
  Matrix backward(const Tape& tape, const Matrix& d_output, Gradients& grads) const;

  Gradients zero_gradients() const;
  bool all_finite() const;

 private:
  std::vector<DenseLayer> layers_;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 64;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  int epochs = 1;
};

/// Adaptive-moment optimiser state for one network.
class Adam {
 public:
  Adam() = default;
  explicit Adam(const DenseNet& net);

  void step(DenseNet& net, const Gradients& grads, const TrainConfig& cfg);
  long steps() const { return t_; }

 private:
  std::vector<Matrix> m_w_, v_w_;
  std::vector<Vector> m_b_, v_b_;
  long t_ = 0;
};

/// Regression batch; `mask`, when non-empty, restricts the loss to entries
/// equal to 1 (Q-learning: the taken action only).
struct Batch {
  Matrix inputs;
  Matrix targets;
  Matrix mask;
};

/// Mean squared error over the (masked) entries and its output gradient.
double mse_loss(const Matrix& outputs, const Batch& batch, Matrix* d_output);

/// One optimiser update on the batch; returns the pre-update loss. Throws
/// Error(Divergence) when the loss is not finite.
double backprop_step(DenseNet& net, Adam& opt, const Batch& batch, const TrainConfig& cfg);

void write_densenet(std::ostream& os, const DenseNet& net);
/// Throws Error(CorruptFile) on malformed input and Error(TopologyMismatch)
/// when `expected_topology` is non-empty and differs.
DenseNet read_densenet(std::istream& is, const std::string& expected_topology = {});

void save_weights(const DenseNet& net, const std::string& path);
DenseNet load_weights(const std::string& path, const std::string& expected_topology = {});

}  // namespace uavassoc::nn
