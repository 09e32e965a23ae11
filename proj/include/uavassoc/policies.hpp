#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "uavassoc/ddqn.hpp"
#include "uavassoc/env.hpp"
#include "uavassoc/features.hpp"
#include "uavassoc/ipnn.hpp"
#include "uavassoc/radio.hpp"

namespace uavassoc {

enum class PolicyKind { Closest, MaxOmniSinr, MeanDistance, AngleAligned, IpnnOnly, Reqiba };

/// CLI names: closest, sinr, meandist, angle, ipnn, reqiba.
const char* policy_name(PolicyKind kind);
PolicyKind policy_from_string(const std::string& name);
std::vector<PolicyKind> parse_policy_list(const std::string& csv);

std::size_t choose_closest(const Environment& env, Vec2 uav_xy);

/// Omni SINR of every BS at unit UAV gain.
std::vector<double> omni_sinr(const LinkTable& links, const RadioConfig& radio);
std::size_t choose_max_omni_sinr(const LinkTable& links, const CandidateSet& candidates, const RadioConfig& radio);

std::size_t choose_mean_distance(const Environment& env, const Trajectory& traj);
std::size_t choose_angle_aligned(const Environment& env, const Trajectory& traj);

/// Candidate with the least predicted interference.
std::size_t choose_ipnn_only(const IpnnModel& model, const StateFeatures& state);

/// Slot picked by the agent; `explore` enables epsilon-greedy.
struct ReqibaChoice {
  std::size_t bs_id = 0;
  int slot = 0;
  EncodedState encoded;
};
ReqibaChoice choose_reqiba(Agent& agent, const IpnnModel& model, const StateFeatures& state, const RadioConfig& radio,
                           bool explore);

/// Everything a policy may look at during one timestep. Features are built
/// lazily because only the learned policies need them.
class StepView {
 public:
  StepView(const Environment& env, const RadioConfig& radio, const Trajectory& traj, std::size_t t,
           const LinkTable& links, const CandidateSet& candidates, std::optional<std::size_t> current, int xi);

  const Environment& env() const { return env_; }
  const RadioConfig& radio() const { return radio_; }
  const Trajectory& trajectory() const { return traj_; }
  std::size_t t() const { return t_; }
  bool is_last() const { return t_ + 1 == traj_.waypoints.size(); }
  const LinkTable& links() const { return links_; }
  const CandidateSet& candidates() const { return candidates_; }
  std::optional<std::size_t> current() const { return current_; }
  const StateFeatures& state() const;

 private:
  const Environment& env_;
  const RadioConfig& radio_;
  const Trajectory& traj_;
  std::size_t t_;
  const LinkTable& links_;
  const CandidateSet& candidates_;
  std::optional<std::size_t> current_;
  int xi_;
  mutable std::optional<StateFeatures> state_;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual PolicyKind kind() const = 0;
  /// Learned policies keep state across episodes and must run sequentially.
  virtual bool learning() const { return false; }
  virtual void begin_episode(const Environment&, const Trajectory&) {}
  virtual std::size_t choose(const StepView& step) = 0;
  /// Reward of the choice just made.
  virtual void feedback(double /*reward*/, bool /*last_step*/) {}
  virtual void end_episode() {}
};

std::unique_ptr<Policy> make_closest_policy();
std::unique_ptr<Policy> make_max_omni_sinr_policy();
std::unique_ptr<Policy> make_mean_distance_policy();
std::unique_ptr<Policy> make_angle_aligned_policy();
std::unique_ptr<Policy> make_ipnn_only_policy(std::shared_ptr<const IpnnModel> model);

/// IPNN + dueling DDQN. With `training` set, every step is stored in the
/// agent's replay memory and trains it; otherwise the agent acts greedily.
std::unique_ptr<Policy> make_reqiba_policy(std::shared_ptr<Agent> agent, std::shared_ptr<const IpnnModel> model,
                                           const RadioConfig& radio, bool training);

}  // namespace uavassoc
