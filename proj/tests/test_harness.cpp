#include <catch_amalgamated.hpp>

#include <algorithm>

#include <cmath>
#include <numeric>
#include <sstream>

#include "uavassoc/harness.hpp"

using namespace uavassoc;
using Catch::Approx;

namespace {

std::shared_ptr<const IpnnModel> quick_model() {
  static const std::shared_ptr<const IpnnModel> m = [] {
    Rng rng(51);
    IpnnTrainConfig cfg;
    cfg.optimiser.epochs = 60;
    return std::make_shared<const IpnnModel>(train_ipnn(generate_ipnn_dataset(IpnnDatasetConfig{}, 4000, rng), cfg));
  }();
  return m;
}

std::vector<std::unique_ptr<Policy>> all_policies(const ScenarioConfig& cfg) {
  std::vector<std::unique_ptr<Policy>> out;
  out.push_back(make_closest_policy());
  out.push_back(make_max_omni_sinr_policy());
  out.push_back(make_mean_distance_policy());
  out.push_back(make_angle_aligned_policy());
  out.push_back(make_ipnn_only_policy(quick_model()));
  AgentConfig ac = cfg.agent;
  ac.batch_size = 16;
  ac.buffer_capacity = 64;
  out.push_back(make_reqiba_policy(std::make_shared<Agent>(ac), quick_model(), cfg.radio, true));
  return out;
}

}  // namespace

TEST_CASE("single-BS world gives identical records", "[harness]") {
  ScenarioConfig cfg;
  cfg.zeta = 2;
  cfg.agent.zeta = 2;
  EnvConfig ec;
  ec.area_side_m = 2000.0;
  BuildingGrid g;
  g.pitch_m = 100.0;
  g.footprint_m = 50.0;
  g.cells_per_side = 20;
  g.heights_m.assign(400, 10.0);
  g.max_height_m = 10.0;
  const Environment env(ec, {{1000.0, 1000.0}}, g);
  cfg.env = ec;
  Rng rng(1);
  const Trajectory traj = generate_trajectory(env, TrajectoryOptions{}, rng);
  const Trial trial = make_trial(cfg, env, traj);

  std::optional<EpisodeRecord> first;
  for (auto& p : all_policies(cfg)) {
    const EpisodeRecord rec = run_episode(trial, cfg.radio, *p, cfg.xi);
    REQUIRE(rec.size() == traj.size());
    REQUIRE(rec.handovers == 0);
    if (!first) {
      first = rec;
      continue;
    }
    REQUIRE(rec.assoc == first->assoc);
    REQUIRE(rec.sinr == first->sinr);
    REQUIRE(rec.reward == first->reward);
    REQUIRE(rec.throughput == first->throughput);
  }
}

TEST_CASE("episode accounting", "[harness]") {
  ScenarioConfig cfg;
  cfg.trajectory.turn_prob = 0.5;
  const Trial trial = make_trial(cfg, 3, 0);
  REQUIRE(trial.links.size() == 100);
  for (auto& p : all_policies(cfg)) {
    const EpisodeRecord rec = run_episode(trial, cfg.radio, *p, cfg.xi);
    REQUIRE(rec.size() == 100);
    REQUIRE(rec.throughput == std::accumulate(rec.reward.begin(), rec.reward.end(), 0.0));
    REQUIRE(rec.handover[0] == 0);
    int count = 0;
    for (std::size_t t = 1; t < rec.size(); ++t) {
      REQUIRE(rec.handover[t] == (rec.assoc[t] != rec.assoc[t - 1] ? 1 : 0));
      count += rec.handover[t];
      const double full = throughput(rec.sinr[t]);
      REQUIRE(rec.reward[t] == Approx(rec.handover[t] ? cfg.radio.handover_penalty * full : full));
    }
    REQUIRE(rec.handovers == count);
  }
}

TEST_CASE("unit handover penalty removes the handover cost", "[harness]") {
  ScenarioConfig cfg;
  const Trial trial = make_trial(cfg, 4, 2);
  auto p = make_ipnn_only_policy(quick_model());
  const EpisodeRecord half = run_episode(trial, cfg.radio, *p, cfg.xi);
  RadioConfig one = cfg.radio;
  one.handover_penalty = 1.0;
  const EpisodeRecord full = run_episode(trial, one, *p, cfg.xi);
  REQUIRE(full.assoc == half.assoc);
  double raw = 0.0;
  for (double s : full.sinr) raw += throughput(s);
  REQUIRE(full.throughput == Approx(raw).epsilon(1e-14));
  if (half.handovers > 0) REQUIRE(full.throughput > half.throughput);
}

TEST_CASE("trials are reproducible and shared across policies", "[harness]") {
  ScenarioConfig cfg;
  const Trial a = make_trial(cfg, 9, 5);
  const Trial b = make_trial(cfg, 9, 5);
  const Trial c = make_trial(cfg, 9, 6);
  REQUIRE(a.trajectory.waypoints == b.trajectory.waypoints);
  REQUIRE(a.env.bs_count() == b.env.bs_count());
  REQUIRE_FALSE(a.trajectory.waypoints == c.trajectory.waypoints);
  // Changing the UAV height keeps the world and the path.
  ScenarioConfig high = cfg;
  high.trajectory.uav_height_m = 180.0;
  const Trial h = make_trial(high, 9, 5);
  REQUIRE(h.trajectory.waypoints == a.trajectory.waypoints);
  REQUIRE(h.env.buildings().heights_m == a.env.buildings().heights_m);
}

TEST_CASE("sweep metrics shape and normalisation", "[harness]") {
  SweepSpec spec;
  spec.param = SweepParam::UavHeight;
  spec.grid = {60.0, 100.0, 140.0};
  spec.trials = 12;
  spec.warmup = 0;
  spec.policies = {PolicyKind::Closest, PolicyKind::MaxOmniSinr};
  spec.seed = 5;
  const SweepResult r = run_sweep(spec);
  REQUIRE(r.rows.size() == 6);
  for (const MetricRow& row : r.rows) {
    REQUIRE(row.trials == 12);
    if (row.policy == PolicyKind::Closest) REQUIRE(row.norm_throughput == 1.0);
    REQUIRE(row.ci_half > 0.0);
  }
  std::ostringstream os;
  write_metrics_csv(os, r.rows);
  const std::string text = os.str();
  REQUIRE(text.rfind("param_value,policy,mean_throughput,norm_throughput,ci_half,handovers_per_episode,ho_ci_half,trials\n", 0) == 0);
  REQUIRE(std::count(text.begin(), text.end(), '\n') == 7);
}

TEST_CASE("confidence interval shrinks with more trials", "[harness]") {
  ScenarioConfig cfg;
  const auto small = evaluate_frozen(cfg, {PolicyKind::Closest}, nullptr, nullptr, 11, 0, 300, true);
  const auto big = evaluate_frozen(cfg, {PolicyKind::Closest}, nullptr, nullptr, 11, 0, 600, true);
  const double ratio = mean_ci(big.at(PolicyKind::Closest).throughput).second /
                       mean_ci(small.at(PolicyKind::Closest).throughput).second;
  REQUIRE(ratio == Approx(1.0 / std::sqrt(2.0)).margin(0.12));

  const auto [m, h] = mean_ci({1.0, 2.0, 3.0, 4.0});
  REQUIRE(m == 2.5);
  REQUIRE(h == Approx(1.959963984540054 * std::sqrt(5.0 / 3.0) / 2.0));
}

TEST_CASE("parallel frozen evaluation equals serial", "[harness]") {
  ScenarioConfig cfg;
  cfg.agent.batch_size = 16;
  cfg.agent.buffer_capacity = 64;
  auto agent = std::make_shared<Agent>(cfg.agent);
  const std::vector<PolicyKind> kinds{PolicyKind::Closest, PolicyKind::MaxOmniSinr, PolicyKind::MeanDistance,
                                      PolicyKind::AngleAligned, PolicyKind::IpnnOnly, PolicyKind::Reqiba};
  const auto par = evaluate_frozen(cfg, kinds, quick_model(), agent, 13, 4, 28, true);
  const auto ser = evaluate_frozen(cfg, kinds, quick_model(), agent, 13, 4, 28, false);
  for (PolicyKind k : kinds) {
    REQUIRE(par.at(k).throughput == ser.at(k).throughput);
    REQUIRE(par.at(k).handovers == ser.at(k).handovers);
    REQUIRE(par.at(k).throughput.size() == 24);
  }
}

TEST_CASE("sweep grids and parameters", "[harness]") {
  REQUIRE(parse_grid("20:200:20").size() == 10);
  REQUIRE(parse_grid("20:200:20").back() == Approx(200.0));
  REQUIRE(parse_grid("0.1,0.5,1") == std::vector<double>{0.1, 0.5, 1.0});
  REQUIRE_THROWS_AS(parse_grid("5:1:1"), Error);
  for (const char* name : {"uav_height", "bs_density", "building_density", "beamwidth", "handover_penalty", "turn_prob"}) {
    REQUIRE(std::string(sweep_param_name(sweep_param_from_string(name))) == name);
  }
  ScenarioConfig cfg;
  apply_sweep_param(cfg, SweepParam::Beamwidth, 30.0);
  REQUIRE(cfg.radio.beamwidth_rad == Approx(std::numbers::pi / 6));
  apply_sweep_param(cfg, SweepParam::HandoverPenalty, 0.1);
  REQUIRE(cfg.radio.handover_penalty == 0.1);
  SweepSpec spec;
  spec.param = SweepParam::UavHeight;
  spec.grid = {500.0};
  REQUIRE_THROWS_AS(spec.validate(), Error);
  apply_fast_profile(spec);
  REQUIRE(spec.trials == 300);
  REQUIRE(spec.effective_warmup() == 100);
}
