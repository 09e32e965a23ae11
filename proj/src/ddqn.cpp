#include "uavassoc/ddqn.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace uavassoc {

namespace {

constexpr double kPowerFloorW = 1e-30;

double dbm(double w) { return watts_to_dbm(std::max(w, kPowerFloorW)); }

bool same_net(const nn::DenseNet& a, const nn::DenseNet& b) {
  if (a.layer_count() != b.layer_count()) return false;
  for (std::size_t k = 0; k < a.layer_count(); ++k) {
    const auto& la = a.layers()[k];
    const auto& lb = b.layers()[k];
    if (la.activation != lb.activation || la.weights.rows() != lb.weights.rows() ||
        la.weights.cols() != lb.weights.cols() || la.weights != lb.weights || la.bias != lb.bias) {
      return false;
    }
  }
  return true;
}

}  // namespace

void AgentConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorKind::InvalidConfig, m); };
  if (zeta < 2 || zeta % 2 != 0) bad("zeta must be an even integer >= 2");
  if (!(discount >= 0.0 && discount < 1.0)) bad("discount must lie in [0, 1)");
  if (!(epsilon_init >= 0.0 && epsilon_init <= 1.0)) bad("epsilon_init must lie in [0, 1]");
  if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) bad("epsilon_decay must lie in (0, 1]");
  if (!(epsilon_min >= 0.0 && epsilon_min <= epsilon_init)) bad("epsilon_min must lie in [0, epsilon_init]");
  if (batch_size < 1) bad("batch_size must be positive");
  if (buffer_capacity < batch_size) bad("buffer_capacity must be at least batch_size");
  if (trunk_units < 1 || stream_units < 1) bad("layer widths must be positive");
  if (!(optimiser.learning_rate >= 0.0)) bad("learning rate must be non-negative");
  if (!(norm.p_dbm_std > 0.0 && norm.i_dbm_std > 0.0 && norm.gamma_scale_m > 0.0)) bad("normalisation scales must be positive");
}

// ---------------------------------------------------------------------------
// Dueling network

DuelingNet::DuelingNet(nn::DenseNet trunk, nn::DenseNet value, nn::DenseNet advantage)
    : trunk_(std::move(trunk)), value_(std::move(value)), advantage_(std::move(advantage)) {
  if (value_.input_dim() != trunk_.output_dim() || advantage_.input_dim() != trunk_.output_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "dueling streams must consume the trunk output");
  }
  if (value_.output_dim() != 1) throw Error(ErrorKind::DimensionMismatch, "value stream must have one output");
}

DuelingNet DuelingNet::random(int inputs, int actions, int trunk_units, int stream_units, Rng& rng) {
  using nn::Activation;
  const nn::LayerSpec trunk[] = {{trunk_units, Activation::Relu}};
  const nn::LayerSpec value[] = {{stream_units, Activation::Relu}, {stream_units, Activation::Relu}, {1, Activation::Linear}};
  const nn::LayerSpec adv[] = {{stream_units, Activation::Relu}, {stream_units, Activation::Relu}, {actions, Activation::Linear}};
  nn::DenseNet t = nn::DenseNet::random(inputs, trunk, rng);
  nn::DenseNet v = nn::DenseNet::random(trunk_units, value, rng);
  nn::DenseNet a = nn::DenseNet::random(trunk_units, adv, rng);
  return DuelingNet(std::move(t), std::move(v), std::move(a));
}

nn::Matrix DuelingNet::q_batch(const nn::Matrix& states) const {
  const nn::Matrix h = trunk_.forward_batch(states);
  const nn::Matrix v = value_.forward_batch(h);
  nn::Matrix a = advantage_.forward_batch(h);
  const Eigen::RowVectorXd shift = v.row(0) - a.colwise().mean();
  a.rowwise() += shift;
  return a;
}

nn::Vector DuelingNet::q_values(const nn::Vector& state) const {
  if (state.size() != input_dim()) throw Error(ErrorKind::DimensionMismatch, "state has wrong length");
  return q_batch(state);
}

nn::Matrix DuelingNet::forward(const nn::Matrix& states, Tape& tape) const {
  const nn::Matrix h = trunk_.forward_batch(states, tape.trunk);
  const nn::Matrix v = value_.forward_batch(h, tape.value);
  nn::Matrix a = advantage_.forward_batch(h, tape.advantage);
  const Eigen::RowVectorXd shift = v.row(0) - a.colwise().mean();
  a.rowwise() += shift;
  return a;
}

void DuelingNet::backward(const Tape& tape, const nn::Matrix& d_q, Gradients& grads) const {
  // dQ_a/dV = 1 and dQ_a/dA_b = [a == b] - 1/n.
  const nn::Matrix d_v = d_q.colwise().sum();
  nn::Matrix d_a = d_q;
  d_a.rowwise() -= d_q.colwise().mean();
  nn::Matrix d_h = value_.backward(tape.value, d_v, grads.value);
  d_h += advantage_.backward(tape.advantage, d_a, grads.advantage);
  trunk_.backward(tape.trunk, d_h, grads.trunk);
}

DuelingNet::Gradients DuelingNet::zero_gradients() const {
  return {trunk_.zero_gradients(), value_.zero_gradients(), advantage_.zero_gradients()};
}

bool DuelingNet::operator==(const DuelingNet& other) const {
  return same_net(trunk_, other.trunk_) && same_net(value_, other.value_) && same_net(advantage_, other.advantage_);
}

double dueling_backprop_step(DuelingNet& net, DuelingAdam& opt, const nn::Batch& batch, const nn::TrainConfig& cfg) {
  if (batch.inputs.cols() == 0) throw Error(ErrorKind::InvalidConfig, "empty batch");
  DuelingNet::Tape tape;
  const nn::Matrix q = net.forward(batch.inputs, tape);
  nn::Matrix d_q;
  const double loss = nn::mse_loss(q, batch, &d_q);
  if (!std::isfinite(loss)) throw Error(ErrorKind::Divergence, "Q loss is not finite");
  DuelingNet::Gradients g = net.zero_gradients();
  net.backward(tape, d_q, g);
  opt.trunk.step(net.trunk(), g.trunk, cfg);
  opt.value.step(net.value(), g.value, cfg);
  opt.advantage.step(net.advantage(), g.advantage, cfg);
  return loss;
}

void write_dueling(std::ostream& os, const DuelingNet& net) {
  os << "uavassoc-dueling 1\n";
  os << "trunk\n";
  nn::write_densenet(os, net.trunk());
  os << "value\n";
  nn::write_densenet(os, net.value());
  os << "advantage\n";
  nn::write_densenet(os, net.advantage());
  os << "end-dueling\n";
  if (!os) throw Error(ErrorKind::Io, "failed writing dueling network");
}

DuelingNet read_dueling(std::istream& is) {
  auto expect = [&](const std::string& tag) {
    std::string w;
    if (!(is >> w) || w != tag) throw Error(ErrorKind::CorruptFile, "dueling file: expected '" + tag + "'");
  };
  std::string w;
  int version = 0;
  if (!(is >> w >> version) || w != "uavassoc-dueling" || version != 1) {
    throw Error(ErrorKind::CorruptFile, "dueling file: bad header");
  }
  expect("trunk");
  nn::DenseNet t = nn::read_densenet(is);
  expect("value");
  nn::DenseNet v = nn::read_densenet(is);
  expect("advantage");
  nn::DenseNet a = nn::read_densenet(is);
  expect("end-dueling");
  try {
    return DuelingNet(std::move(t), std::move(v), std::move(a));
  } catch (const Error& e) {
    throw Error(ErrorKind::TopologyMismatch, e.what());
  }
}

// ---------------------------------------------------------------------------
// Replay memory

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorKind::InvalidConfig, "replay capacity must be positive");
  items_.reserve(capacity);
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
  ++pushed_;
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  const std::size_t n = items_.size();
  if (count > n) throw Error(ErrorKind::InsufficientBuffer, "need " + std::to_string(count) + " entries, have " + std::to_string(n));
  if (scratch_.size() != n) {
    scratch_.resize(n);
    for (std::size_t i = 0; i < n; ++i) scratch_[i] = i;
  }
  // Partial Fisher-Yates; the permutation state carries over between calls,
  // which keeps every draw uniform.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n - i));
    std::swap(scratch_[i], scratch_[std::min(j, n - 1)]);
  }
  return {scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(count)};
}

// ---------------------------------------------------------------------------
// State encoding and action selection

EncodedState encode_state(const StateFeatures& s, std::span<const double> i_zeta, const AgentConfig& cfg,
                          const RadioConfig& radio) {
  const int z = cfg.zeta;
  const int valid = static_cast<int>(s.rows());
  if (valid > z) throw Error(ErrorKind::DimensionMismatch, "more candidates than zeta");
  if (i_zeta.size() != s.rows()) throw Error(ErrorKind::DimensionMismatch, "interference estimates do not match rows");
  const StateNormalisation& n = cfg.norm;
  EncodedState out;
  out.valid = valid;
  out.x = nn::Vector::Zero(cfg.state_dim());
  out.x(0) = s.gamma_m / n.gamma_scale_m;
  out.x(1 + z) = s.t_flag;
  for (int k = 0; k < valid; ++k) {
    out.x(1 + k) = (dbm(i_zeta[k] + radio.noise_w) - n.i_dbm_mean) / n.i_dbm_std;
    out.x(2 + z + k) = (dbm(s.p_zeta[k]) - n.p_dbm_mean) / n.p_dbm_std;
    out.x(2 + 2 * z + k) = s.o_zeta[k];
  }
  return out;
}

StateNormalisation fit_normalisation(std::span<const StateFeatures> states,
                                     std::span<const std::vector<double>> i_zetas, const RadioConfig& radio) {
  if (states.size() != i_zetas.size()) throw Error(ErrorKind::DimensionMismatch, "states and estimates differ in count");
  auto moments = [](const std::vector<double>& v, double& mean, double& sd) {
    if (v.empty()) return;
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s2 = 0.0;
    for (double x : v) s2 += (x - m) * (x - m);
    s2 /= static_cast<double>(v.size());
    mean = m;
    sd = s2 > 1e-12 ? std::sqrt(s2) : 1.0;
  };
  std::vector<double> p, i;
  for (std::size_t k = 0; k < states.size(); ++k) {
    for (std::size_t r = 0; r < states[k].rows(); ++r) {
      p.push_back(dbm(states[k].p_zeta[r]));
      i.push_back(dbm(i_zetas[k].at(r) + radio.noise_w));
    }
  }
  StateNormalisation out;
  moments(p, out.p_dbm_mean, out.p_dbm_std);
  moments(i, out.i_dbm_mean, out.i_dbm_std);
  return out;
}

int greedy_action(const nn::Vector& q, int valid) {
  if (valid < 1 || valid > q.size()) throw Error(ErrorKind::DimensionMismatch, "no valid action");
  int best = 0;
  for (int a = 1; a < valid; ++a) {
    if (q(a) > q(best)) best = a;
  }
  return best;
}

int act(const DuelingNet& net, const EncodedState& state, double epsilon, Rng& rng) {
  if (state.valid < 1) throw Error(ErrorKind::DimensionMismatch, "no valid action");
  if (epsilon > 0.0 && uniform01(rng) < epsilon) {
    return std::min(state.valid - 1, static_cast<int>(uniform01(rng) * state.valid));
  }
  return greedy_action(net.q_values(state.x), state.valid);
}

double decay_epsilon(double epsilon, const AgentConfig& cfg) {
  return std::max(epsilon * cfg.epsilon_decay, cfg.epsilon_min);
}

void sync_target(const DuelingNet& eval, DuelingNet& target) { target = eval; }

double train_batch(DuelingNet& eval, const DuelingNet& target, DuelingAdam& opt, const ReplayBuffer& buffer,
                   const AgentConfig& cfg, Rng& rng) {
  const auto idx = buffer.sample(static_cast<std::size_t>(cfg.batch_size), rng);
  const int dim = eval.input_dim();
  const int actions = eval.actions();
  const auto b = static_cast<Eigen::Index>(idx.size());

  nn::Matrix s(dim, b), s_next(dim, b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const Transition& tr = buffer[idx[c]];
    if (tr.state.size() != dim || tr.next_state.size() != dim) {
      throw Error(ErrorKind::DimensionMismatch, "transition state has wrong length");
    }
    s.col(c) = tr.state;
    s_next.col(c) = tr.next_state;
  }
  const nn::Matrix q_target = target.q_batch(s_next);
  const nn::Matrix q_eval = eval.q_batch(s_next);
  // Default: the target network selects, the evaluation network scores.
  const nn::Matrix& chooser = cfg.conventional_double ? q_eval : q_target;
  const nn::Matrix& scorer = cfg.conventional_double ? q_target : q_eval;

  nn::Batch batch;
  batch.inputs = std::move(s);
  batch.targets = nn::Matrix::Zero(actions, b);
  batch.mask = nn::Matrix::Zero(actions, b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const Transition& tr = buffer[idx[c]];
    double y = tr.reward;
    if (tr.t_flag == 0 && tr.next_valid > 0) {
      const int a_next = greedy_action(chooser.col(c), tr.next_valid);
      y += cfg.discount * scorer(a_next, c);
    }
    if (tr.action < 0 || tr.action >= actions) throw Error(ErrorKind::DimensionMismatch, "action out of range");
    batch.targets(tr.action, c) = y;
    batch.mask(tr.action, c) = 1.0;
  }
  return dueling_backprop_step(eval, opt, batch, cfg.optimiser);
}

// ---------------------------------------------------------------------------
// Agent

Agent::Agent(const AgentConfig& cfg)
    : cfg_(cfg), buffer_(static_cast<std::size_t>(std::max(cfg.buffer_capacity, 1))), epsilon_(cfg.epsilon_init),
      rng_(make_rng(cfg.seed, 0)) {
  cfg_.validate();
  Rng init = make_rng(cfg.seed, 1);
  eval_ = DuelingNet::random(cfg_.state_dim(), cfg_.zeta, cfg_.trunk_units, cfg_.stream_units, init);
  target_ = eval_;
  opt_ = DuelingAdam(eval_);
}

int Agent::act(const EncodedState& s, bool explore) {
  // The greedy path leaves the RNG untouched so frozen agents can be shared.
  if (!explore) return greedy_action(eval_.q_values(s.x), s.valid);
  return uavassoc::act(eval_, s, epsilon_, rng_);
}

void Agent::observe(Transition t) {
  buffer_.push(std::move(t));
  if (buffer_.size() >= static_cast<std::size_t>(cfg_.batch_size)) {
    last_loss_ = train_batch(eval_, target_, opt_, buffer_, cfg_, rng_);
    ++train_steps_;
  }
  epsilon_ = decay_epsilon(epsilon_, cfg_);
}

void Agent::save(const std::string& dir) const {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir + ": " + ec.message());
  const fs::path root(dir);
  {
    std::ofstream m(root / "manifest.txt");
    if (!m) throw Error(ErrorKind::Io, "cannot write manifest in " + dir);
    m.precision(17);
    m << "uavassoc-agent 1\n"
      << "zeta " << cfg_.zeta << '\n'
      << "trunk_units " << cfg_.trunk_units << '\n'
      << "stream_units " << cfg_.stream_units << '\n'
      << "discount " << cfg_.discount << '\n'
      << "epsilon_init " << cfg_.epsilon_init << '\n'
      << "epsilon_decay " << cfg_.epsilon_decay << '\n'
      << "epsilon_min " << cfg_.epsilon_min << '\n'
      << "batch_size " << cfg_.batch_size << '\n'
      << "buffer_capacity " << cfg_.buffer_capacity << '\n'
      << "learning_rate " << cfg_.optimiser.learning_rate << '\n'
      << "conventional_double " << (cfg_.conventional_double ? 1 : 0) << '\n'
      << "seed " << cfg_.seed << '\n'
      << "p_dbm_mean " << cfg_.norm.p_dbm_mean << '\n'
      << "p_dbm_std " << cfg_.norm.p_dbm_std << '\n'
      << "i_dbm_mean " << cfg_.norm.i_dbm_mean << '\n'
      << "i_dbm_std " << cfg_.norm.i_dbm_std << '\n'
      << "gamma_scale_m " << cfg_.norm.gamma_scale_m << '\n'
      << "epsilon " << epsilon_ << '\n'
      << "train_steps " << train_steps_ << '\n'
      << "end\n";
    if (!m) throw Error(ErrorKind::Io, "failed writing manifest");
  }
  for (const auto& [name, net] : {std::pair{"eval.weights", &eval_}, std::pair{"target.weights", &target_}}) {
    std::ofstream os(root / name);
    if (!os) throw Error(ErrorKind::Io, std::string("cannot write ") + name);
    write_dueling(os, *net);
  }
}

Agent Agent::load(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::ifstream m(root / "manifest.txt");
  if (!m) throw Error(ErrorKind::Io, "cannot read manifest in " + dir);
  std::string key, value;
  int version = 0;
  if (!(m >> key >> version) || key != "uavassoc-agent" || version != 1) {
    throw Error(ErrorKind::CorruptFile, "agent manifest: bad header");
  }
  std::map<std::string, std::string> kv;
  bool ended = false;
  while (m >> key) {
    if (key == "end") {
      ended = true;
      break;
    }
    if (!(m >> value)) break;
    kv[key] = value;
  }
  if (!ended) throw Error(ErrorKind::CorruptFile, "agent manifest: missing end marker");
  auto num = [&](const char* k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw Error(ErrorKind::CorruptFile, std::string("agent manifest: missing ") + k);
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorKind::CorruptFile, std::string("agent manifest: bad value for ") + k);
    }
  };
  AgentConfig cfg;
  cfg.zeta = static_cast<int>(num("zeta"));
  cfg.trunk_units = static_cast<int>(num("trunk_units"));
  cfg.stream_units = static_cast<int>(num("stream_units"));
  cfg.discount = num("discount");
  cfg.epsilon_init = num("epsilon_init");
  cfg.epsilon_decay = num("epsilon_decay");
  cfg.epsilon_min = num("epsilon_min");
  cfg.batch_size = static_cast<int>(num("batch_size"));
  cfg.buffer_capacity = static_cast<int>(num("buffer_capacity"));
  cfg.optimiser.learning_rate = num("learning_rate");
  cfg.conventional_double = num("conventional_double") != 0.0;
  cfg.seed = std::stoull(kv.at("seed"));
  cfg.norm.p_dbm_mean = num("p_dbm_mean");
  cfg.norm.p_dbm_std = num("p_dbm_std");
  cfg.norm.i_dbm_mean = num("i_dbm_mean");
  cfg.norm.i_dbm_std = num("i_dbm_std");
  cfg.norm.gamma_scale_m = num("gamma_scale_m");

  Agent agent(cfg);
  agent.epsilon_ = num("epsilon");
  agent.train_steps_ = static_cast<long>(num("train_steps"));
  for (auto [name, net] : {std::pair{"eval.weights", &agent.eval_}, std::pair{"target.weights", &agent.target_}}) {
    std::ifstream is(root / name);
    if (!is) throw Error(ErrorKind::Io, std::string("cannot read ") + name);
    DuelingNet loaded = read_dueling(is);
    if (loaded.input_dim() != cfg.state_dim() || loaded.actions() != cfg.zeta ||
        loaded.trunk().topology() != net->trunk().topology() ||
        loaded.value().topology() != net->value().topology() ||
        loaded.advantage().topology() != net->advantage().topology()) {
      throw Error(ErrorKind::TopologyMismatch, std::string(name) + " does not match the manifest");
    }
    *net = std::move(loaded);
  }
  agent.opt_ = DuelingAdam(agent.eval_);
  return agent;
}

}  // namespace uavassoc
