#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "uavassoc/features.hpp"
#include "uavassoc/nn.hpp"
#include "uavassoc/radio.hpp"

namespace uavassoc {

/// Affine scaling of the dB-valued state inputs.
struct StateNormalisation {
  double p_dbm_mean = -90.0;
  double p_dbm_std = 15.0;
  double i_dbm_mean = -90.0;
  double i_dbm_std = 15.0;
  double gamma_scale_m = 200.0;
};

struct AgentConfig {
  int zeta = 10;
  double discount = 0.1;
  double epsilon_init = 1.0;
  double epsilon_decay = 0.995;
  double epsilon_min = 0.001;
  int batch_size = 2048;
  int buffer_capacity = 10000;
  int trunk_units = 64;
  int stream_units = 32;
  nn::TrainConfig optimiser{};
  /// false: the target network picks the next action and the evaluation
  /// network scores it. true: the usual double-DQN assignment.
  bool conventional_double = false;
  std::uint64_t seed = 11;
  StateNormalisation norm{};

  void validate() const;
  int state_dim() const { return 3 * zeta + 2; }
};

/// Shared dense trunk feeding a value stream and an advantage stream,
/// combined as Q = V + A - mean(A).
class DuelingNet {
 public:
  DuelingNet() = default;
  DuelingNet(nn::DenseNet trunk, nn::DenseNet value, nn::DenseNet advantage);

  static DuelingNet random(int inputs, int actions, int trunk_units, int stream_units, Rng& rng);

  int input_dim() const { return trunk_.input_dim(); }
  int actions() const { return advantage_.output_dim(); }

  nn::Vector q_values(const nn::Vector& state) const;
  nn::Matrix q_batch(const nn::Matrix& states) const;

  struct Tape {
    nn::Tape trunk, value, advantage;
  };
  struct Gradients {
    nn::Gradients trunk, value, advantage;
  };
  nn::Matrix forward(const nn::Matrix& states, Tape& tape) const;
  void backward(const Tape& tape, const nn::Matrix& d_q, Gradients& grads) const;
  Gradients zero_gradients() const;

  const nn::DenseNet& trunk() const { return trunk_; }
  const nn::DenseNet& value() const { return value_; }
  const nn::DenseNet& advantage() const { return advantage_; }
  nn::DenseNet& trunk() { return trunk_; }
  nn::DenseNet& value() { return value_; }
  nn::DenseNet& advantage() { return advantage_; }

  bool operator==(const DuelingNet& other) const;

 private:
  nn::DenseNet trunk_, value_, advantage_;
};

struct DuelingAdam {
  nn::Adam trunk, value, advantage;

  DuelingAdam() = default;
  explicit DuelingAdam(const DuelingNet& net) : trunk(net.trunk()), value(net.value()), advantage(net.advantage()) {}
};

/// Masked-MSE update of a dueling network; returns the pre-update loss.
double dueling_backprop_step(DuelingNet& net, DuelingAdam& opt, const nn::Batch& batch, const nn::TrainConfig& cfg);

void write_dueling(std::ostream& os, const DuelingNet& net);
DuelingNet read_dueling(std::istream& is);

struct Transition {
  nn::Vector state;
  int action = 0;
  double reward = 0.0;
  nn::Vector next_state;
  int next_valid = 0;  // number of selectable actions in next_state
  int t_flag = 0;      // 1 when `state` is the episode's final step
};

/// Fixed-capacity ring buffer; the oldest entry is overwritten when full.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10000);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }
  /// Total pushes so far (including overwritten ones).
  std::size_t pushed() const { return pushed_; }

  /// `count` distinct indices, uniformly without replacement.
  std::vector<std::size_t> sample(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::size_t pushed_ = 0;
  std::vector<Transition> items_;
  mutable std::vector<std::size_t> scratch_;
};

struct EncodedState {
  nn::Vector x;
  int valid = 0;
};

/// Layout [gamma, i_zeta, t, p_zeta, o_zeta]; empty slots are zero.
EncodedState encode_state(const StateFeatures& s, std::span<const double> i_zeta, const AgentConfig& cfg,
                          const RadioConfig& radio);

/// Fits the dB normalisation on a sample of observations.
StateNormalisation fit_normalisation(std::span<const StateFeatures> states,
                                     std::span<const std::vector<double>> i_zetas, const RadioConfig& radio);

/// Largest Q among the first `valid` actions; lowest index wins ties.
int greedy_action(const nn::Vector& q, int valid);

/// Epsilon-greedy choice over the first `state.valid` actions.
int act(const DuelingNet& net, const EncodedState& state, double epsilon, Rng& rng);

double decay_epsilon(double epsilon, const AgentConfig& cfg);

void sync_target(const DuelingNet& eval, DuelingNet& target);

/// Samples a batch, builds the TD targets and takes one optimiser step on
/// `eval`. Throws Error(InsufficientBuffer) when the buffer is too small.
double train_batch(DuelingNet& eval, const DuelingNet& target, DuelingAdam& opt, const ReplayBuffer& buffer,
                   const AgentConfig& cfg, Rng& rng);

/// Evaluation and target networks, replay memory and exploration state.
class Agent {
 public:
  explicit Agent(const AgentConfig& cfg);

  const AgentConfig& config() const { return cfg_; }
  AgentConfig& config() { return cfg_; }
  double epsilon() const { return epsilon_; }
  void set_epsilon(double e) { epsilon_ = e; }
  const DuelingNet& eval_net() const { return eval_; }
  const DuelingNet& target_net() const { return target_; }
  DuelingNet& eval_net() { return eval_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  long train_steps() const { return train_steps_; }
  double last_loss() const { return last_loss_; }

  /// Greedy when `explore` is false, epsilon-greedy otherwise.
  int act(const EncodedState& s, bool explore);

  /// Stores the transition, trains once the buffer holds a batch and decays
  /// epsilon.
  void observe(Transition t);

  void end_episode() { sync_target(eval_, target_); }

  /// Directory with manifest.txt, eval.weights and target.weights.
  void save(const std::string& dir) const;
  static Agent load(const std::string& dir);

 private:
  AgentConfig cfg_;
  DuelingNet eval_, target_;
  DuelingAdam opt_;
  ReplayBuffer buffer_;
  double epsilon_;
  Rng rng_;
  long train_steps_ = 0;
  double last_loss_ = 0.0;
};

}  // namespace uavassoc
