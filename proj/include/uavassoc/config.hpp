#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "uavassoc/ddqn.hpp"
#include "uavassoc/env.hpp"
#include "uavassoc/ipnn.hpp"
#include "uavassoc/radio.hpp"

namespace uavassoc {

/// Every tunable of one simulated scenario.
struct ScenarioConfig {
  EnvConfig env;
  RadioConfig radio;
  TrajectoryOptions trajectory;
  int zeta = 10;
  int xi = 125;
  AgentConfig agent;
  IpnnTrainConfig ipnn;
  int ipnn_trials = 20000;
  double ipnn_min_height_m = 20.0;
  double ipnn_max_height_m = 200.0;
  /// Trials sampled to fit the agent's input normalisation.
  int norm_trials = 10;

  void validate() const;
};

/// Applies one `section.key = value` assignment. Throws Error(InvalidConfig)
/// for unknown keys or unparsable values.
void apply_config_value(ScenarioConfig& cfg, const std::string& key, const std::string& value);

/// Flat text format: one `key = value` per line, `#` starts a comment.
ScenarioConfig parse_config(std::istream& is, ScenarioConfig base = {});
ScenarioConfig load_config_file(const std::string& path, ScenarioConfig base = {});

/// Every accepted key with its current value, in file syntax.
void write_config(std::ostream& os, const ScenarioConfig& cfg);
std::vector<std::string> config_keys();

}  // namespace uavassoc
