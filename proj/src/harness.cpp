#include "uavassoc/harness.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <sstream>

namespace uavassoc {

namespace {

// Disjoint stream index domains under one master seed.
constexpr std::uint64_t kNormTrialBase = 1ULL << 40;
constexpr std::uint64_t kAgentStream = 1ULL << 50;
constexpr std::uint64_t kIpnnDataStream = kAgentStream + 1;
constexpr std::uint64_t kIpnnTrainStream = kAgentStream + 2;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::unique_ptr<Policy> make_policy(PolicyKind kind, const std::shared_ptr<const IpnnModel>& ipnn,
                                    const std::shared_ptr<Agent>& agent, const RadioConfig& radio) {
  switch (kind) {
    case PolicyKind::Closest: return make_closest_policy();
    case PolicyKind::MaxOmniSinr: return make_max_omni_sinr_policy();
    case PolicyKind::MeanDistance: return make_mean_distance_policy();
    case PolicyKind::AngleAligned: return make_angle_aligned_policy();
    case PolicyKind::IpnnOnly: return make_ipnn_only_policy(ipnn);
    case PolicyKind::Reqiba: return make_reqiba_policy(agent, ipnn, radio, false);
  }
  throw Error(ErrorKind::InvalidConfig, "unknown policy kind");
}

std::string ipnn_cache_key(const ScenarioConfig& cfg) {
  // Only the world, the radio link and the training recipe shape the data.
  ScenarioConfig k;
  k.env = cfg.env;
  k.env.rng_seed = 0;
  k.radio = cfg.radio;
  k.radio.handover_penalty = RadioConfig{}.handover_penalty;
  k.ipnn = cfg.ipnn;
  k.ipnn_trials = cfg.ipnn_trials;
  k.ipnn_min_height_m = cfg.ipnn_min_height_m;
  k.ipnn_max_height_m = cfg.ipnn_max_height_m;
  std::ostringstream os;
  write_config(os, k);
  os << "ipnn.seed = " << cfg.ipnn.seed << '\n';
  return os.str();
}

}  // namespace

Trial make_trial(const ScenarioConfig& cfg, Environment env, Trajectory traj) {
  Trial t{std::move(env), std::move(traj), {}, {}};
  t.links.reserve(t.trajectory.size());
  t.candidates.reserve(t.trajectory.size());
  for (std::size_t s = 0; s < t.trajectory.size(); ++s) {
    t.links.push_back(compute_links(t.env, cfg.radio, t.trajectory.waypoints[s], t.trajectory.uav_height_m));
    t.candidates.push_back(select_candidates(t.links.back(), cfg.zeta));
  }
  return t;
}

Trial make_trial(const ScenarioConfig& cfg, std::uint64_t seed, std::uint64_t index) {
  EnvConfig ec = cfg.env;
  ec.rng_seed = stream_seed(seed, 2 * index);
  Environment env = generate_environment(ec);
  Rng rng = make_rng(seed, 2 * index + 1);
  Trajectory traj = generate_trajectory(env, cfg.trajectory, rng);
  return make_trial(cfg, std::move(env), std::move(traj));
}

EpisodeRecord run_episode(const Trial& trial, const RadioConfig& radio, Policy& policy, int xi) {
  const std::size_t steps = trial.trajectory.size();
  if (trial.links.size() != steps || trial.candidates.size() != steps) {
    throw Error(ErrorKind::DimensionMismatch, "trial is missing per-step radio data");
  }
  EpisodeRecord rec;
  rec.assoc.reserve(steps);
  rec.sinr.reserve(steps);
  rec.reward.reserve(steps);
  rec.handover.reserve(steps);
  policy.begin_episode(trial.env, trial.trajectory);
  std::optional<std::size_t> current;
  for (std::size_t t = 0; t < steps; ++t) {
    StepView view(trial.env, radio, trial.trajectory, t, trial.links[t], trial.candidates[t], current, xi);
    const std::size_t id = policy.choose(view);
    if (id >= trial.env.bs_count()) throw Error(ErrorKind::DimensionMismatch, "policy chose a missing BS");
    const bool handover = current.has_value() && *current != id;
    const double s = directional_sinr(trial.links[t], trial.env, radio, id);
    const double r = step_reward(radio, s, handover);
    policy.feedback(r, t + 1 == steps);
    rec.assoc.push_back(id);
    rec.sinr.push_back(s);
    rec.reward.push_back(r);
    rec.handover.push_back(handover ? 1 : 0);
    rec.throughput += r;
    rec.handovers += handover ? 1 : 0;
    current = id;
  }
  policy.end_episode();
  return rec;
}

EpisodeRecord run_episode(const Environment& env, const Trajectory& traj, const RadioConfig& radio, Policy& policy,
                          int zeta, int xi) {
  ScenarioConfig cfg;
  cfg.radio = radio;
  cfg.zeta = zeta;
  return run_episode(make_trial(cfg, env, traj), radio, policy, xi);
}

// ---------------------------------------------------------------------------
// Sweep parameters

const char* sweep_param_name(SweepParam p) {
  switch (p) {
    case SweepParam::UavHeight: return "uav_height";
    case SweepParam::BsDensity: return "bs_density";
    case SweepParam::BuildingDensity: return "building_density";
    case SweepParam::Beamwidth: return "beamwidth";
    case SweepParam::HandoverPenalty: return "handover_penalty";
    case SweepParam::TurnProb: return "turn_prob";
  }
  return "?";
}

SweepParam sweep_param_from_string(const std::string& s) {
  for (SweepParam p : {SweepParam::UavHeight, SweepParam::BsDensity, SweepParam::BuildingDensity,
                       SweepParam::Beamwidth, SweepParam::HandoverPenalty, SweepParam::TurnProb}) {
    if (s == sweep_param_name(p)) return p;
  }
  throw Error(ErrorKind::Usage, "unknown sweep parameter '" + s +
                                    "' (expected uav_height, bs_density, building_density, beamwidth, "
                                    "handover_penalty, turn_prob)");
}

void apply_sweep_param(ScenarioConfig& cfg, SweepParam p, double value) {
  switch (p) {
    case SweepParam::UavHeight: cfg.trajectory.uav_height_m = value; break;
    case SweepParam::BsDensity: cfg.env.bs_density_per_km2 = value; break;
    case SweepParam::BuildingDensity: cfg.env.building_density_per_km2 = value; break;
    case SweepParam::Beamwidth: cfg.radio.beamwidth_rad = deg_to_rad(value); break;
    case SweepParam::HandoverPenalty: cfg.radio.handover_penalty = value; break;
    case SweepParam::TurnProb: cfg.trajectory.turn_prob = value; break;
  }
}

std::pair<double, double> sweep_param_range(SweepParam p) {
  switch (p) {
    case SweepParam::UavHeight: return {20.0, 200.0};
    case SweepParam::BsDensity: return {1.0, 10.0};
    case SweepParam::BuildingDensity: return {100.0, 1000.0};
    case SweepParam::Beamwidth: return {30.0, 90.0};
    case SweepParam::HandoverPenalty: return {0.0, 1.0};
    case SweepParam::TurnProb: return {0.0, 1.0};
  }
  return {0.0, 0.0};
}

std::vector<double> parse_grid(const std::string& text) {
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorKind::Usage, "bad grid value '" + s + "' in '" + text + "'");
    }
  };
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.size() != 3) throw Error(ErrorKind::Usage, "grid must be 'start:stop:step'");
    const double a = number(parts[0]), b = number(parts[1]), step = number(parts[2]);
    if (!(step > 0.0) || b < a) throw Error(ErrorKind::Usage, "grid needs start <= stop and a positive step");
    const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9));
    if (n > 100000) throw Error(ErrorKind::Usage, "grid too long");
    for (long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
  } else {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) out.push_back(number(item));
    }
  }
  if (out.empty()) throw Error(ErrorKind::Usage, "empty grid");
  return out;
}

void SweepSpec::validate() const {
  base.validate();
  if (trials < 1) throw Error(ErrorKind::InvalidConfig, "trials must be positive");
  if (effective_warmup() >= trials) throw Error(ErrorKind::InvalidConfig, "warm-up must leave measured trials");
  if (policies.empty()) throw Error(ErrorKind::InvalidConfig, "no policies to evaluate");
  if (grid.empty()) throw Error(ErrorKind::InvalidConfig, "empty grid");
  const auto [lo, hi] = sweep_param_range(param);
  for (double v : grid) {
    if (!(v >= lo - 1e-9 && v <= hi + 1e-9)) {
      std::ostringstream os;
      os << sweep_param_name(param) << " value " << v << " outside [" << lo << ", " << hi << "]";
      throw Error(ErrorKind::InvalidConfig, os.str());
    }
    ScenarioConfig c = base;
    apply_sweep_param(c, param, v);
    c.validate();
  }
}

void apply_fast_profile(SweepSpec& spec) {
  spec.trials = 300;
  spec.warmup = 100;
}

// ---------------------------------------------------------------------------
// Models

std::shared_ptr<const IpnnModel> train_ipnn_for(const ScenarioConfig& cfg, std::uint64_t seed,
                                                IpnnTrainReport* report) {
  IpnnDatasetConfig dc;
  dc.env = cfg.env;
  dc.radio = cfg.radio;
  dc.min_height_m = cfg.ipnn_min_height_m;
  dc.max_height_m = cfg.ipnn_max_height_m;
  Rng rng = make_rng(seed, kIpnnDataStream);
  const std::vector<IpnnSample> data = generate_ipnn_dataset(dc, cfg.ipnn_trials, rng);
  IpnnTrainConfig tc = cfg.ipnn;
  tc.seed = stream_seed(seed, kIpnnTrainStream);
  return std::make_shared<const IpnnModel>(train_ipnn(data, tc, report));
}

std::shared_ptr<const IpnnModel> IpnnCache::get(const ScenarioConfig& cfg, std::uint64_t seed, const ProgressFn& log) {
  const std::string key = ipnn_cache_key(cfg) + "seed = " + std::to_string(seed);
  if (auto it = models_.find(key); it != models_.end()) return it->second;
  const auto t0 = std::chrono::steady_clock::now();
  IpnnTrainReport report;
  auto model = train_ipnn_for(cfg, seed, &report);
  if (log) {
    std::ostringstream os;
    os << "ipnn trained: holdout rmse " << std::setprecision(3) << report.holdout_rmse_db() << " dB in "
       << std::setprecision(3) << seconds_since(t0) << " s";
    log(os.str());
  }
  models_.emplace(key, model);
  return model;
}

StateNormalisation calibrate_normalisation(const ScenarioConfig& cfg, const IpnnModel& model, std::uint64_t seed) {
  std::vector<StateFeatures> states;
  std::vector<std::vector<double>> estimates;
  for (int k = 0; k < cfg.norm_trials; ++k) {
    const Trial trial = make_trial(cfg, seed, kNormTrialBase + static_cast<std::uint64_t>(k));
    for (std::size_t t = 0; t < trial.trajectory.size(); ++t) {
      states.push_back(build_state(trial.links[t], trial.env, cfg.radio, trial.candidates[t], std::nullopt,
                                   t + 1 == trial.trajectory.size(), cfg.xi));
      estimates.push_back(estimate_interference(model, states.back()));
    }
  }
  StateNormalisation n = fit_normalisation(states, estimates, cfg.radio);
  n.gamma_scale_m = cfg.agent.norm.gamma_scale_m;
  return n;
}

// ---------------------------------------------------------------------------
// Evaluation

std::map<PolicyKind, PolicySamples> evaluate_frozen(const ScenarioConfig& cfg, const std::vector<PolicyKind>& kinds,
                                                    std::shared_ptr<const IpnnModel> ipnn,
                                                    std::shared_ptr<Agent> frozen_agent, std::uint64_t seed,
                                                    int first, int last, bool parallel) {
  const int n = std::max(0, last - first);
  const std::size_t nk = kinds.size();
  std::vector<double> tp(static_cast<std::size_t>(n) * nk), ho(static_cast<std::size_t>(n) * nk);
  std::exception_ptr failure;
  std::mutex failure_mu;

#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int i = 0; i < n; ++i) {
    try {
      const Trial trial = make_trial(cfg, seed, static_cast<std::uint64_t>(first + i));
      for (std::size_t k = 0; k < nk; ++k) {
        auto policy = make_policy(kinds[k], ipnn, frozen_agent, cfg.radio);
        const EpisodeRecord rec = run_episode(trial, cfg.radio, *policy, cfg.xi);
        tp[static_cast<std::size_t>(i) * nk + k] = rec.throughput;
        ho[static_cast<std::size_t>(i) * nk + k] = rec.handovers;
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mu);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::map<PolicyKind, PolicySamples> out;
  for (std::size_t k = 0; k < nk; ++k) {
    PolicySamples& s = out[kinds[k]];
    for (int i = 0; i < n; ++i) {
      s.throughput.push_back(tp[static_cast<std::size_t>(i) * nk + k]);
      s.handovers.push_back(ho[static_cast<std::size_t>(i) * nk + k]);
    }
  }
  return out;
}

PolicySamples train_online(const ScenarioConfig& cfg, Agent& agent, std::shared_ptr<const IpnnModel> ipnn,
                           std::uint64_t seed, int trials, int warmup, const ProgressFn& log) {
  // Non-owning handle; the policy never outlives this call.
  std::shared_ptr<Agent> handle(&agent, [](Agent*) {});
  auto policy = make_reqiba_policy(handle, std::move(ipnn), cfg.radio, true);
  PolicySamples out;
  double recent = 0.0;
  int recent_n = 0;
  for (int k = 0; k < trials; ++k) {
    const Trial trial = make_trial(cfg, seed, static_cast<std::uint64_t>(k));
    const EpisodeRecord rec = run_episode(trial, cfg.radio, *policy, cfg.xi);
    if (k >= warmup) {
      out.throughput.push_back(rec.throughput);
      out.handovers.push_back(rec.handovers);
    }
    recent += rec.throughput;
    ++recent_n;
    if (log && ((k + 1) % 50 == 0 || k + 1 == trials)) {
      std::ostringstream os;
      os << "reqiba trial " << (k + 1) << "/" << trials << ": mean throughput " << std::fixed << std::setprecision(2)
         << recent / recent_n << ", epsilon " << std::setprecision(4) << agent.epsilon() << ", loss "
         << std::setprecision(4) << agent.last_loss();
      log(os.str());
      recent = 0.0;
      recent_n = 0;
    }
  }
  return out;
}

std::pair<double, double> mean_ci(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double s2 = 0.0;
  for (double x : v) s2 += (x - m) * (x - m);
  s2 /= static_cast<double>(v.size() - 1);
  return {m, 1.959963984540054 * std::sqrt(s2 / static_cast<double>(v.size()))};
}

SweepResult run_sweep(const SweepSpec& spec, const ProgressFn& log) {
  spec.validate();
  const int warmup = spec.effective_warmup();
  bool needs_ipnn = false, has_reqiba = false;
  std::vector<PolicyKind> frozen{PolicyKind::Closest};
  for (PolicyKind k : spec.policies) {
    needs_ipnn = needs_ipnn || k == PolicyKind::IpnnOnly || k == PolicyKind::Reqiba;
    if (k == PolicyKind::Reqiba) {
      has_reqiba = true;
    } else if (k != PolicyKind::Closest) {
      frozen.push_back(k);
    }
  }

  SweepResult result;
  IpnnCache cache;
  for (double value : spec.grid) {
    ScenarioConfig cfg = spec.base;
    apply_sweep_param(cfg, spec.param, value);
    if (log) {
      std::ostringstream os;
      os << sweep_param_name(spec.param) << " = " << value;
      log(os.str());
    }
    std::shared_ptr<const IpnnModel> ipnn;
    if (needs_ipnn) ipnn = spec.ipnn ? spec.ipnn : cache.get(cfg, spec.seed, log);

    std::map<PolicyKind, double> wall;
    auto t0 = std::chrono::steady_clock::now();
    std::map<PolicyKind, PolicySamples> samples =
        evaluate_frozen(cfg, frozen, ipnn, nullptr, spec.seed, warmup, spec.trials, spec.parallel);
    const double frozen_wall = seconds_since(t0);
    for (PolicyKind k : frozen) wall[k] = frozen_wall / static_cast<double>(frozen.size());

    if (has_reqiba) {
      t0 = std::chrono::steady_clock::now();
      AgentConfig ac = cfg.agent;
      ac.zeta = cfg.zeta;
      ac.seed = stream_seed(spec.seed, kAgentStream);
      ac.norm = calibrate_normalisation(cfg, *ipnn, spec.seed);
      Agent agent(ac);
      samples[PolicyKind::Reqiba] = train_online(cfg, agent, ipnn, spec.seed, spec.trials, warmup, log);
      wall[PolicyKind::Reqiba] = seconds_since(t0);
    }

    const double baseline = mean_ci(samples.at(PolicyKind::Closest).throughput).first;
    for (PolicyKind k : spec.policies) {
      const PolicySamples& s = samples.at(k);
      MetricRow row;
      row.param_value = value;
      row.policy = k;
      std::tie(row.mean_throughput, row.ci_half) = mean_ci(s.throughput);
      std::tie(row.handovers_per_episode, row.ho_ci_half) = mean_ci(s.handovers);
      row.norm_throughput = k == PolicyKind::Closest ? 1.0 : (baseline > 0.0 ? row.mean_throughput / baseline : 0.0);
      row.trials = static_cast<int>(s.throughput.size());
      row.wall_s = wall[k];
      if (log) {
        std::ostringstream os;
        os << "  " << policy_name(k) << ": throughput " << std::fixed << std::setprecision(2) << row.mean_throughput
           << " +- " << row.ci_half << ", normalised " << std::setprecision(3) << row.norm_throughput
           << ", handovers " << std::setprecision(2) << row.handovers_per_episode << ", " << std::setprecision(1)
           << row.wall_s << " s";
        log(os.str());
      }
      result.rows.push_back(row);
    }
    result.samples.push_back(std::move(samples));
  }
  return result;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "param_value,policy,mean_throughput,norm_throughput,ci_half,handovers_per_episode,ho_ci_half,trials\n";
  for (const MetricRow& r : rows) {
    out << r.param_value << ',' << policy_name(r.policy) << ',' << r.mean_throughput << ',' << r.norm_throughput << ','
        << r.ci_half << ',' << r.handovers_per_episode << ',' << r.ho_ci_half << ',' << r.trials << '\n';
  }
  os << out.str();
  if (!os) throw Error(ErrorKind::Io, "failed writing metrics CSV");
}

}  // namespace uavassoc
