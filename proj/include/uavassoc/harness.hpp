#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "uavassoc/config.hpp"
#include "uavassoc/policies.hpp"

namespace uavassoc {

struct EpisodeRecord {
  std::vector<std::size_t> assoc;
  std::vector<double> sinr;
  std::vector<double> reward;
  std::vector<int> handover;
  double throughput = 0.0;  // sum of rewards
  int handovers = 0;

  std::size_t size() const { return assoc.size(); }
};

/// One Monte-Carlo trial: the world, the flight and the per-step radio view.
struct Trial {
  Environment env;
  Trajectory trajectory;
  std::vector<LinkTable> links;
  std::vector<CandidateSet> candidates;
};

/// Streams are derived from (seed, trial index) only, so the same index
/// yields the same world under every policy and every grid point that does
/// not change the geometry.
Trial make_trial(const ScenarioConfig& cfg, std::uint64_t seed, std::uint64_t index);

/// Precomputes links and candidates for an existing world.
Trial make_trial(const ScenarioConfig& cfg, Environment env, Trajectory traj);

EpisodeRecord run_episode(const Trial& trial, const RadioConfig& radio, Policy& policy, int xi);

/// Convenience form that ray traces the trajectory itself.
EpisodeRecord run_episode(const Environment& env, const Trajectory& traj, const RadioConfig& radio, Policy& policy,
                          int zeta, int xi);

enum class SweepParam { UavHeight, BsDensity, BuildingDensity, Beamwidth, HandoverPenalty, TurnProb };

const char* sweep_param_name(SweepParam p);
SweepParam sweep_param_from_string(const std::string& s);
/// Sets the swept quantity; beamwidth is given in degrees.
void apply_sweep_param(ScenarioConfig& cfg, SweepParam p, double value);
/// Allowed range of each swept quantity.
std::pair<double, double> sweep_param_range(SweepParam p);
/// "a:b:step" inclusive of b (within rounding), or a comma list.
std::vector<double> parse_grid(const std::string& text);

struct SweepSpec {
  ScenarioConfig base;
  SweepParam param = SweepParam::UavHeight;
  std::vector<double> grid{100.0};
  int trials = 2000;
  int warmup = -1;  // < 0 means a quarter of `trials`
  std::vector<PolicyKind> policies{PolicyKind::Closest};
  std::uint64_t seed = 1;
  bool parallel = true;
  /// Pre-trained model used at every grid point instead of retraining.
  std::shared_ptr<const IpnnModel> ipnn;

  int effective_warmup() const { return warmup < 0 ? trials / 4 : warmup; }
  void validate() const;
};

/// 300 trials with 100 warm-up.
void apply_fast_profile(SweepSpec& spec);

struct MetricRow {
  double param_value = 0.0;
  PolicyKind policy = PolicyKind::Closest;
  double mean_throughput = 0.0;
  double norm_throughput = 0.0;
  double ci_half = 0.0;
  double handovers_per_episode = 0.0;
  double ho_ci_half = 0.0;
  int trials = 0;
  double wall_s = 0.0;
};

/// Raw per-trial totals for one (grid point, policy).
struct PolicySamples {
  std::vector<double> throughput;
  std::vector<double> handovers;
};

struct SweepResult {
  std::vector<MetricRow> rows;
  /// samples[grid index][policy] over the measured trials.
  std::vector<std::map<PolicyKind, PolicySamples>> samples;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Per-point cache of trained interference models keyed by the settings
/// that change the training data.
class IpnnCache {
 public:
  std::shared_ptr<const IpnnModel> get(const ScenarioConfig& cfg, std::uint64_t seed, const ProgressFn& log);

 private:
  std::map<std::string, std::shared_ptr<const IpnnModel>> models_;
};

std::shared_ptr<const IpnnModel> train_ipnn_for(const ScenarioConfig& cfg, std::uint64_t seed,
                                                IpnnTrainReport* report = nullptr);

/// Fits the agent's input scaling on states drawn from dedicated trials.
StateNormalisation calibrate_normalisation(const ScenarioConfig& cfg, const IpnnModel& model, std::uint64_t seed);

/// Frozen (non-learning) policies over trials [first, last). The parallel
/// and serial forms return identical values.
std::map<PolicyKind, PolicySamples> evaluate_frozen(const ScenarioConfig& cfg, const std::vector<PolicyKind>& kinds,
                                                    std::shared_ptr<const IpnnModel> ipnn,
                                                    std::shared_ptr<Agent> frozen_agent, std::uint64_t seed,
                                                    int first, int last, bool parallel);

/// Trains `agent` online over trials [0, trials); returns totals of trials
/// at index >= warmup.
PolicySamples train_online(const ScenarioConfig& cfg, Agent& agent, std::shared_ptr<const IpnnModel> ipnn,
                           std::uint64_t seed, int trials, int warmup, const ProgressFn& log = {});

/// Mean and 95% normal-approximation half width.
std::pair<double, double> mean_ci(const std::vector<double>& v);

SweepResult run_sweep(const SweepSpec& spec, const ProgressFn& log = {});

/// param_value,policy,mean_throughput,norm_throughput,ci_half,handovers_per_episode,ho_ci_half,trials
void write_metrics_csv(std::ostream& os, const std::vector<MetricRow>& rows);

}  // namespace uavassoc
