#include "uavassoc/nn.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace uavassoc::nn {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
  }
  return "linear";
}

Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::Linear;
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  throw Error(ErrorKind::CorruptFile, "unknown activation '" + s + "'");
}

void Gradients::set_zero() {
  for (Matrix& m : d_weights) m.setZero();
  for (Vector& v : d_bias) v.setZero();
}

double Gradients::max_abs() const {
  double m = 0.0;
  for (const Matrix& w : d_weights) m = std::max(m, w.cwiseAbs().maxCoeff());
  for (const Vector& b : d_bias) m = std::max(m, b.cwiseAbs().maxCoeff());
  return m;
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayer& l = layers_[i];
    if (l.bias.size() != l.weights.rows()) {
      throw Error(ErrorKind::DimensionMismatch, "layer " + std::to_string(i) + ": bias size != output size");
    }
    if (i > 0 && l.inputs() != layers_[i - 1].outputs()) {
      throw Error(ErrorKind::DimensionMismatch, "layer " + std::to_string(i) + ": input size != previous output");
    }
  }
}

DenseNet DenseNet::random(int inputs, std::span<const LayerSpec> specs, Rng& rng) {
  std::vector<DenseLayer> layers;
  int fan_in = inputs;
  for (const LayerSpec& s : specs) {
    DenseLayer l;
    l.activation = s.activation;
    l.weights.resize(s.units, fan_in);
    l.bias = Vector::Zero(s.units);
    const double limit = std::sqrt(6.0 / (fan_in + s.units));
    for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r) l.weights(r, c) = limit * (2.0 * uniform01(rng) - 1.0);
    }
    layers.push_back(std::move(l));
    fan_in = s.units;
  }
  return DenseNet(std::move(layers));
}

int DenseNet::input_dim() const { return layers_.empty() ? 0 : layers_.front().inputs(); }
int DenseNet::output_dim() const { return layers_.empty() ? 0 : layers_.back().outputs(); }

std::string DenseNet::topology() const {
  std::ostringstream os;
  os << input_dim();
  for (const DenseLayer& l : layers_) os << '-' << l.outputs() << ':' << to_string(l.activation);
  return os.str();
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

namespace {

void activate(Matrix& z, Activation a) {
  switch (a) {
    case Activation::Linear: break;
    case Activation::Tanh: z = z.array().tanh(); break;
    case Activation::Relu: z = z.cwiseMax(0.0); break;
  }
}

// Converts dL/d(output) into dL/d(pre-activation) given the post-activation values.
void activation_backward(Matrix& grad, const Matrix& post, Activation a) {
  switch (a) {
    case Activation::Linear: break;
    case Activation::Tanh: grad.array() *= 1.0 - post.array().square(); break;
    case Activation::Relu: grad.array() *= (post.array() > 0.0).cast<double>(); break;
  }
}

void check_input(const DenseNet& net, Eigen::Index rows) {
  if (net.layer_count() == 0) throw Error(ErrorKind::DimensionMismatch, "network has no layers");
  if (rows != net.input_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "input dimension " + std::to_string(rows) + " != " +
                                                  std::to_string(net.input_dim()));
  }
}

}  // namespace

Vector DenseNet::forward(const Vector& input) const {
  check_input(*this, input.size());
  Matrix x = input;
  for (const DenseLayer& l : layers_) {
    Matrix z = l.weights * x;
    z.colwise() += l.bias;
    activate(z, l.activation);
    x = std::move(z);
  }
  return x.col(0);
}

Matrix DenseNet::forward_batch(const Matrix& inputs) const {
  check_input(*this, inputs.rows());
  Matrix x = inputs;
  for (const DenseLayer& l : layers_) {
    Matrix z = l.weights * x;
    z.colwise() += l.bias;
    activate(z, l.activation);
    x = std::move(z);
  }
  return x;
}

Matrix DenseNet::forward_batch(const Matrix& inputs, Tape& tape) const {
  check_input(*this, inputs.rows());
  tape.values.resize(layers_.size() + 1);
  tape.values[0] = inputs;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayer& l = layers_[i];
    Matrix z = l.weights * tape.values[i];
    z.colwise() += l.bias;
    activate(z, l.activation);
    tape.values[i + 1] = std::move(z);
  }
  return tape.values.back();
}

Matrix DenseNet::backward(const Tape& tape, const Matrix& d_output, Gradients& grads) const {
  Matrix grad = d_output;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const DenseLayer& l = layers_[k];
    activation_backward(grad, tape.values[k + 1], l.activation);
    grads.d_weights[k].noalias() += grad * tape.values[k].transpose();
    grads.d_bias[k] += grad.rowwise().sum();
    grad = l.weights.transpose() * grad;
  }
  return grad;
}

Gradients DenseNet::zero_gradients() const {
  Gradients g;
  for (const DenseLayer& l : layers_) {
    g.d_weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
    g.d_bias.push_back(Vector::Zero(l.bias.size()));
  }
  return g;
}

bool DenseNet::all_finite() const {
  for (const DenseLayer& l : layers_) {
    if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

Adam::Adam(const DenseNet& net) {
  for (const DenseLayer& l : net.layers()) {
    m_w_.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
    v_w_.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
    m_b_.push_back(Vector::Zero(l.bias.size()));
    v_b_.push_back(Vector::Zero(l.bias.size()));
  }
}

void Adam::step(DenseNet& net, const Gradients& grads, const TrainConfig& cfg) {
  if (m_w_.size() != net.layer_count()) *this = Adam(net);
  ++t_;
  const double lr = cfg.learning_rate;
  if (lr == 0.0) return;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
  const double alpha = lr * std::sqrt(c2) / c1;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    param.array() -= alpha * m.array() / (v.array().sqrt() + cfg.epsilon * std::sqrt(c2));
  };
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    DenseLayer& l = net.layers()[k];
    update(l.weights, m_w_[k], v_w_[k], grads.d_weights[k]);
    update(l.bias, m_b_[k], v_b_[k], grads.d_bias[k]);
  }
}

double mse_loss(const Matrix& outputs, const Batch& batch, Matrix* d_output) {
  if (outputs.rows() != batch.targets.rows() || outputs.cols() != batch.targets.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "targets do not match network outputs");
  }
  Matrix diff = outputs - batch.targets;
  double denom = static_cast<double>(diff.size());
  if (batch.mask.size() != 0) {
    if (batch.mask.rows() != diff.rows() || batch.mask.cols() != diff.cols()) {
      throw Error(ErrorKind::DimensionMismatch, "mask does not match network outputs");
    }
    diff.array() *= batch.mask.array();
    denom = batch.mask.sum();
  }
  if (denom <= 0.0) throw Error(ErrorKind::InvalidConfig, "empty batch");
  if (d_output) *d_output = (2.0 / denom) * diff;
  return diff.squaredNorm() / denom;
}

double backprop_step(DenseNet& net, Adam& opt, const Batch& batch, const TrainConfig& cfg) {
  if (batch.inputs.cols() == 0) throw Error(ErrorKind::InvalidConfig, "empty batch");
  Tape tape;
  const Matrix out = net.forward_batch(batch.inputs, tape);
  Matrix d_out;
  const double loss = mse_loss(out, batch, &d_out);
  if (!std::isfinite(loss)) throw Error(ErrorKind::Divergence, "loss is not finite");
  Gradients g = net.zero_gradients();
  net.backward(tape, d_out, g);
  opt.step(net, g, cfg);
  return loss;
}

void write_densenet(std::ostream& os, const DenseNet& net) {
  std::ostringstream out;
  out.precision(17);
  out << "uavassoc-densenet 1\n";
  out << "input " << net.input_dim() << '\n';
  out << "layers " << net.layer_count() << '\n';
  for (const DenseLayer& l : net.layers()) {
    out << "dense " << l.inputs() << ' ' << l.outputs() << ' ' << to_string(l.activation) << '\n';
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) out << (c ? " " : "") << l.weights(r, c);
      out << '\n';
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out << (r ? " " : "") << l.bias(r);
    out << '\n';
  }
  out << "end\n";
  os << out.str();
}

DenseNet read_densenet(std::istream& is, const std::string& expected_topology) {
  auto corrupt = [](const std::string& msg) { throw Error(ErrorKind::CorruptFile, "weight file: " + msg); };
  std::string word;
  int version = 0;
  if (!(is >> word >> version) || word != "uavassoc-densenet" || version != 1) corrupt("bad header");
  int input = 0;
  std::size_t count = 0;
  if (!(is >> word >> input) || word != "input" || input < 1) corrupt("missing input size");
  if (!(is >> word >> count) || word != "layers" || count == 0 || count > 1000) corrupt("missing layer count");

  std::vector<DenseLayer> layers;
  std::ostringstream topo;
  topo << input;
  int prev = input;
  for (std::size_t k = 0; k < count; ++k) {
    int in = 0, out = 0;
    std::string act;
    if (!(is >> word >> in >> out >> act) || word != "dense" || in < 1 || out < 1) corrupt("bad layer header");
    if (in != prev) corrupt("layer input does not chain");
    const Activation a = activation_from_string(act);
    topo << '-' << out << ':' << to_string(a);
    DenseLayer l;
    l.activation = a;
    l.weights.resize(out, in);
    l.bias.resize(out);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) {
        if (!(is >> l.weights(r, c))) corrupt("truncated weights");
      }
    }
    for (Eigen::Index r = 0; r < out; ++r) {
      if (!(is >> l.bias(r))) corrupt("truncated biases");
    }
    layers.push_back(std::move(l));
    prev = out;
  }
  if (!(is >> word) || word != "end") corrupt("missing end marker");
  if (!expected_topology.empty() && topo.str() != expected_topology) {
    throw Error(ErrorKind::TopologyMismatch, "expected " + expected_topology + ", file has " + topo.str());
  }
  return DenseNet(std::move(layers));
}

void save_weights(const DenseNet& net, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path);
  write_densenet(os, net);
}

DenseNet load_weights(const std::string& path, const std::string& expected_topology) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot read " + path);
  return read_densenet(is, expected_topology);
}

}  // namespace uavassoc::nn
