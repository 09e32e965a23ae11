#include "uavassoc/policies.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace uavassoc {

const char* policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Closest: return "closest";
    case PolicyKind::MaxOmniSinr: return "sinr";
    case PolicyKind::MeanDistance: return "meandist";
    case PolicyKind::AngleAligned: return "angle";
    case PolicyKind::IpnnOnly: return "ipnn";
    case PolicyKind::Reqiba: return "reqiba";
  }
  return "?";
}

PolicyKind policy_from_string(const std::string& name) {
  for (PolicyKind k : {PolicyKind::Closest, PolicyKind::MaxOmniSinr, PolicyKind::MeanDistance,
                       PolicyKind::AngleAligned, PolicyKind::IpnnOnly, PolicyKind::Reqiba}) {
    if (name == policy_name(k)) return k;
  }
  throw Error(ErrorKind::Usage, "unknown policy '" + name + "' (expected closest, sinr, meandist, angle, ipnn, reqiba)");
}

std::vector<PolicyKind> parse_policy_list(const std::string& csv) {
  std::vector<PolicyKind> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const PolicyKind k = policy_from_string(item);
    for (PolicyKind seen : out) {
      if (seen == k) throw Error(ErrorKind::Usage, "policy '" + item + "' listed twice");
    }
    out.push_back(k);
  }
  if (out.empty()) throw Error(ErrorKind::Usage, "empty policy list");
  return out;
}

std::size_t choose_closest(const Environment& env, Vec2 uav_xy) {
  if (env.bs_count() == 0) throw Error(ErrorKind::InsufficientBs, "no base stations");
  std::size_t best = 0;
  double best_d = distance(uav_xy, env.bs(0));
  for (std::size_t i = 1; i < env.bs_count(); ++i) {
    const double d = distance(uav_xy, env.bs(i));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<double> omni_sinr(const LinkTable& links, const RadioConfig& radio) {
  double total = 0.0;
  for (const LinkBudget& l : links.links) total += l.rx_power_w;
  std::vector<double> out(links.size());
  for (std::size_t i = 0; i < links.size(); ++i) {
    const double own = links[i].rx_power_w;
    out[i] = own / (std::max(total - own, 0.0) + radio.noise_w);
  }
  return out;
}

std::size_t choose_max_omni_sinr(const LinkTable& links, const CandidateSet& candidates, const RadioConfig& radio) {
  if (candidates.size() == 0) throw Error(ErrorKind::InsufficientBs, "empty candidate set");
  const std::vector<double> s = omni_sinr(links, radio);
  std::size_t best = candidates.ids[0];
  for (std::size_t id : candidates.ids) {
    if (s[id] > s[best] || (s[id] == s[best] && id < best)) best = id;
  }
  return best;
}

std::size_t choose_mean_distance(const Environment& env, const Trajectory& traj) {
  if (env.bs_count() == 0) throw Error(ErrorKind::InsufficientBs, "no base stations");
  if (traj.waypoints.empty()) throw Error(ErrorKind::InvalidConfig, "empty trajectory");
  std::size_t best = 0;
  double best_mean = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < env.bs_count(); ++i) {
    double sum = 0.0;
    for (Vec2 w : traj.waypoints) sum += distance(w, env.bs(i));
    const double mean = sum / static_cast<double>(traj.waypoints.size());
    if (mean < best_mean) {
      best_mean = mean;
      best = i;
    }
  }
  return best;
}

std::size_t choose_angle_aligned(const Environment& env, const Trajectory& traj) {
  if (env.bs_count() == 0) throw Error(ErrorKind::InsufficientBs, "no base stations");
  if (traj.waypoints.empty()) throw Error(ErrorKind::InvalidConfig, "empty trajectory");
  const double heading = traj.headings_rad.empty() ? 0.0 : traj.headings_rad.front();
  const Vec2 start = traj.waypoints.front();
  std::size_t best = 0;
  double best_diff = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < env.bs_count(); ++i) {
    const double diff = std::abs(wrap_angle(bearing(start, env.bs(i)) - heading));
    if (diff < best_diff) {
      best_diff = diff;
      best = i;
    }
  }
  return best;
}

std::size_t choose_ipnn_only(const IpnnModel& model, const StateFeatures& state) {
  if (state.rows() == 0) throw Error(ErrorKind::InsufficientBs, "empty candidate set");
  const std::vector<double> i = estimate_interference(model, state);
  std::size_t slot = 0;
  for (std::size_t k = 1; k < i.size(); ++k) {
    if (i[k] < i[slot]) slot = k;
  }
  return state.candidate_ids[slot];
}

ReqibaChoice choose_reqiba(Agent& agent, const IpnnModel& model, const StateFeatures& state, const RadioConfig& radio,
                           bool explore) {
  const std::vector<double> i = estimate_interference(model, state);
  ReqibaChoice c;
  c.encoded = encode_state(state, i, agent.config(), radio);
  c.slot = agent.act(c.encoded, explore);
  c.bs_id = state.candidate_ids[static_cast<std::size_t>(c.slot)];
  return c;
}

StepView::StepView(const Environment& env, const RadioConfig& radio, const Trajectory& traj, std::size_t t,
                   const LinkTable& links, const CandidateSet& candidates, std::optional<std::size_t> current, int xi)
    : env_(env), radio_(radio), traj_(traj), t_(t), links_(links), candidates_(candidates), current_(current), xi_(xi) {}

const StateFeatures& StepView::state() const {
  if (!state_) state_ = build_state(links_, env_, radio_, candidates_, current_, is_last(), xi_);
  return *state_;
}

namespace {

class ClosestPolicy final : public Policy {
 public:
  PolicyKind kind() const override { return PolicyKind::Closest; }
  std::size_t choose(const StepView& s) override { return choose_closest(s.env(), s.links().uav_xy); }
};

class MaxOmniSinrPolicy final : public Policy {
 public:
  PolicyKind kind() const override { return PolicyKind::MaxOmniSinr; }
  std::size_t choose(const StepView& s) override {
    return choose_max_omni_sinr(s.links(), s.candidates(), s.radio());
  }
};

// Both fixed-BS policies decide once from the whole trajectory.
class MeanDistancePolicy final : public Policy {
 public:
  PolicyKind kind() const override { return PolicyKind::MeanDistance; }
  void begin_episode(const Environment& env, const Trajectory& traj) override {
    choice_ = choose_mean_distance(env, traj);
  }
  std::size_t choose(const StepView&) override { return choice_; }

 private:
  std::size_t choice_ = 0;
};

class AngleAlignedPolicy final : public Policy {
 public:
  PolicyKind kind() const override { return PolicyKind::AngleAligned; }
  void begin_episode(const Environment& env, const Trajectory& traj) override {
    choice_ = choose_angle_aligned(env, traj);
  }
  std::size_t choose(const StepView&) override { return choice_; }

 private:
  std::size_t choice_ = 0;
};

class IpnnOnlyPolicy final : public Policy {
 public:
  explicit IpnnOnlyPolicy(std::shared_ptr<const IpnnModel> m) : model_(std::move(m)) {
    if (!model_) throw Error(ErrorKind::InvalidConfig, "ipnn policy needs a model");
  }
  PolicyKind kind() const override { return PolicyKind::IpnnOnly; }
  std::size_t choose(const StepView& s) override { return choose_ipnn_only(*model_, s.state()); }

 private:
  std::shared_ptr<const IpnnModel> model_;
};

class ReqibaPolicy final : public Policy {
 public:
  ReqibaPolicy(std::shared_ptr<Agent> agent, std::shared_ptr<const IpnnModel> model, const RadioConfig& radio,
               bool training)
      : agent_(std::move(agent)), model_(std::move(model)), radio_(radio), training_(training) {
    if (!agent_ || !model_) throw Error(ErrorKind::InvalidConfig, "reqiba policy needs an agent and a model");
  }
  PolicyKind kind() const override { return PolicyKind::Reqiba; }
  bool learning() const override { return training_; }

  void begin_episode(const Environment&, const Trajectory&) override { pending_.reset(); }

  std::size_t choose(const StepView& s) override {
    ReqibaChoice c = choose_reqiba(*agent_, *model_, s.state(), radio_, training_);
    if (training_) {
      // The previous step's transition completes once the next state exists.
      if (pending_) {
        pending_->next_state = c.encoded.x;
        pending_->next_valid = c.encoded.valid;
        agent_->observe(std::move(*pending_));
      }
      pending_.emplace();
      pending_->state = std::move(c.encoded.x);
      pending_->action = c.slot;
      pending_->t_flag = s.state().t_flag;
    }
    return c.bs_id;
  }

  void feedback(double reward, bool last_step) override {
    if (!training_ || !pending_) return;
    pending_->reward = reward;
    if (last_step) {
      pending_->t_flag = 1;
      pending_->next_state = pending_->state;
      pending_->next_valid = 0;
      agent_->observe(std::move(*pending_));
      pending_.reset();
    }
  }

  void end_episode() override {
    if (training_) agent_->end_episode();
  }

 private:
  std::shared_ptr<Agent> agent_;
  std::shared_ptr<const IpnnModel> model_;
  RadioConfig radio_;
  bool training_;
  std::optional<Transition> pending_;
};

}  // namespace

std::unique_ptr<Policy> make_closest_policy() { return std::make_unique<ClosestPolicy>(); }
std::unique_ptr<Policy> make_max_omni_sinr_policy() { return std::make_unique<MaxOmniSinrPolicy>(); }
std::unique_ptr<Policy> make_mean_distance_policy() { return std::make_unique<MeanDistancePolicy>(); }
std::unique_ptr<Policy> make_angle_aligned_policy() { return std::make_unique<AngleAlignedPolicy>(); }
std::unique_ptr<Policy> make_ipnn_only_policy(std::shared_ptr<const IpnnModel> model) {
  return std::make_unique<IpnnOnlyPolicy>(std::move(model));
}
std::unique_ptr<Policy> make_reqiba_policy(std::shared_ptr<Agent> agent, std::shared_ptr<const IpnnModel> model,
                                           const RadioConfig& radio, bool training) {
  return std::make_unique<ReqibaPolicy>(std::move(agent), std::move(model), radio, training);
}

}  // namespace uavassoc
