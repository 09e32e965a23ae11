#include "uavassoc/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>

namespace uavassoc {

namespace {

struct Field {
  std::string key;
  std::function<void(ScenarioConfig&, const std::string&)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_value(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = first + text.size();
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
  } else {
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec == std::errc() && p == last) return v;
  }
  throw Error(ErrorKind::InvalidConfig, "bad value '" + text + "' for " + key);
}

template <class T>
std::string format_value(T v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else {
    // Shortest text that reads back to the same value.
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  }
}

template <class T, class Access>
Field field(std::string key, Access access) {
  return Field{key,
               [access, key](ScenarioConfig& c, const std::string& s) { access(c) = parse_value<T>(key, s); },
               [access](const ScenarioConfig& c) { return format_value<T>(access(const_cast<ScenarioConfig&>(c))); }};
}

// Stored in radians, exposed in degrees.
template <class Access>
Field degree_field(std::string key, Access access) {
  return Field{key,
               [access, key](ScenarioConfig& c, const std::string& s) { access(c) = deg_to_rad(parse_value<double>(key, s)); },
               [access](const ScenarioConfig& c) { return format_value(rad_to_deg(access(const_cast<ScenarioConfig&>(c)))); }};
}

#define UA_FIELD(T, key, expr) field<T>(key, [](ScenarioConfig& c) -> T& { return c.expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      UA_FIELD(double, "env.area_side_m", env.area_side_m),
      UA_FIELD(double, "env.bs_density_per_km2", env.bs_density_per_km2),
      UA_FIELD(double, "env.bs_height_m", env.bs_height_m),
      UA_FIELD(double, "env.building_density_per_km2", env.building_density_per_km2),
      UA_FIELD(double, "env.building_coverage", env.building_coverage),
      UA_FIELD(double, "env.building_height_scale_m", env.building_height_scale_m),
      UA_FIELD(std::uint64_t, "env.rng_seed", env.rng_seed),
      UA_FIELD(double, "radio.tx_power_w", radio.tx_power_w),
      UA_FIELD(double, "radio.nearfield_pathloss_db", radio.nearfield_pathloss_db),
      UA_FIELD(double, "radio.alpha_los", radio.alpha_los),
      UA_FIELD(double, "radio.alpha_nlos", radio.alpha_nlos),
      UA_FIELD(double, "radio.noise_w", radio.noise_w),
      UA_FIELD(int, "radio.ula_elements", radio.ula_elements),
      degree_field("radio.beamwidth_deg", [](ScenarioConfig& c) -> double& { return c.radio.beamwidth_rad; }),
      UA_FIELD(double, "radio.handover_penalty", radio.handover_penalty),
      UA_FIELD(double, "trajectory.uav_height_m", trajectory.uav_height_m),
      UA_FIELD(int, "trajectory.timesteps", trajectory.timesteps),
      UA_FIELD(double, "trajectory.turn_prob", trajectory.turn_prob),
      UA_FIELD(double, "trajectory.speed_mps", trajectory.speed_mps),
      UA_FIELD(double, "trajectory.step_duration_s", trajectory.step_duration_s),
      UA_FIELD(double, "trajectory.start_margin_m", trajectory.start_margin_m),
      degree_field("trajectory.turn_angle_deg", [](ScenarioConfig& c) -> double& { return c.trajectory.turn_angle_rad; }),
      UA_FIELD(int, "features.zeta", zeta),
      UA_FIELD(int, "features.xi", xi),
      UA_FIELD(double, "agent.discount", agent.discount),
      UA_FIELD(double, "agent.epsilon_init", agent.epsilon_init),
      UA_FIELD(double, "agent.epsilon_decay", agent.epsilon_decay),
      UA_FIELD(double, "agent.epsilon_min", agent.epsilon_min),
      UA_FIELD(int, "agent.batch_size", agent.batch_size),
      UA_FIELD(int, "agent.buffer_capacity", agent.buffer_capacity),
      UA_FIELD(int, "agent.trunk_units", agent.trunk_units),
      UA_FIELD(int, "agent.stream_units", agent.stream_units),
      UA_FIELD(double, "agent.learning_rate", agent.optimiser.learning_rate),
      UA_FIELD(bool, "agent.conventional_double", agent.conventional_double),
      UA_FIELD(int, "agent.norm_trials", norm_trials),
      UA_FIELD(double, "ipnn.learning_rate", ipnn.optimiser.learning_rate),
      UA_FIELD(int, "ipnn.batch_size", ipnn.optimiser.batch_size),
      UA_FIELD(int, "ipnn.epochs", ipnn.optimiser.epochs),
      UA_FIELD(double, "ipnn.holdout_fraction", ipnn.holdout_fraction),
      UA_FIELD(int, "ipnn.trials", ipnn_trials),
      UA_FIELD(double, "ipnn.min_height_m", ipnn_min_height_m),
      UA_FIELD(double, "ipnn.max_height_m", ipnn_max_height_m),
  };
  return all;
}

#undef UA_FIELD

}  // namespace

void ScenarioConfig::validate() const {
  env.validate();
  radio.validate();
  if (trajectory.timesteps < 1) throw Error(ErrorKind::InvalidConfig, "trajectory.timesteps must be positive");
  if (!(trajectory.turn_prob >= 0.0 && trajectory.turn_prob <= 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "trajectory.turn_prob must lie in [0, 1]");
  }
  if (!(trajectory.uav_height_m > 0.0)) throw Error(ErrorKind::InvalidConfig, "trajectory.uav_height_m must be positive");
  if (zeta < 2 || zeta % 2 != 0) throw Error(ErrorKind::InvalidConfig, "features.zeta must be even and >= 2");
  if (xi < 1) throw Error(ErrorKind::InvalidConfig, "features.xi must be positive");
  if (agent.zeta != zeta) throw Error(ErrorKind::InvalidConfig, "agent and feature zeta differ");
  agent.validate();
  if (ipnn_trials < 1) throw Error(ErrorKind::InvalidConfig, "ipnn.trials must be positive");
  if (!(ipnn_min_height_m > 0.0 && ipnn_max_height_m >= ipnn_min_height_m)) {
    throw Error(ErrorKind::InvalidConfig, "ipnn height range must be positive and ordered");
  }
  if (norm_trials < 1) throw Error(ErrorKind::InvalidConfig, "agent.norm_trials must be positive");
}

void apply_config_value(ScenarioConfig& cfg, const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (f.key == key) {
      f.set(cfg, value);
      if (key == "features.zeta") cfg.agent.zeta = cfg.zeta;
      return;
    }
  }
  throw Error(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
}

ScenarioConfig parse_config(std::istream& is, ScenarioConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      apply_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

ScenarioConfig load_config_file(const std::string& path, ScenarioConfig base) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot read config file " + path);
  return parse_config(is, std::move(base));
}

void write_config(std::ostream& os, const ScenarioConfig& cfg) {
  for (const Field& f : fields()) os << f.key << " = " << f.get(cfg) << '\n';
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.push_back(f.key);
  return out;
}

}  // namespace uavassoc
