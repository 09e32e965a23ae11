#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include "uavassoc/harness.hpp"
#include "uavassoc/policies.hpp"

using namespace uavassoc;
using Catch::Approx;

namespace {

Environment flat_world(std::vector<Vec2> bs, double side = 2000.0) {
  EnvConfig ec;
  ec.area_side_m = side;
  BuildingGrid g;
  g.pitch_m = 100.0;
  g.footprint_m = 10.0;
  g.cells_per_side = static_cast<int>(side / 100.0);
  g.heights_m.assign(static_cast<std::size_t>(g.cells_per_side) * g.cells_per_side, 0.0);
  return Environment(ec, std::move(bs), g);
}

Trajectory straight(Vec2 start, double heading, int steps) {
  Trajectory t;
  for (int k = 0; k < steps; ++k) t.waypoints.push_back(start + 10.0 * k * Vec2{std::cos(heading), std::sin(heading)});
  t.headings_rad.assign(static_cast<std::size_t>(steps - 1), heading);
  return t;
}

const IpnnModel& quick_model() {
  static const IpnnModel m = [] {
    Rng rng(41);
    IpnnTrainConfig cfg;
    cfg.optimiser.epochs = 60;
    return train_ipnn(generate_ipnn_dataset(IpnnDatasetConfig{}, 4000, rng), cfg);
  }();
  return m;
}

}  // namespace

TEST_CASE("closest BS", "[policies]") {
  REQUIRE(choose_closest(flat_world({{300.0, 100.0}, {200.0, 100.0}}), {100.0, 100.0}) == 1);
  REQUIRE(choose_closest(flat_world({{200.0, 100.0}, {0.0, 100.0}}), {100.0, 100.0}) == 0);
  Rng rng(1);
  std::vector<Vec2> bs;
  for (int i = 0; i < 50; ++i) bs.push_back({2000.0 * uniform01(rng), 2000.0 * uniform01(rng)});
  const Environment env = flat_world(bs);
  for (int k = 0; k < 100; ++k) {
    const Vec2 p{2000.0 * uniform01(rng), 2000.0 * uniform01(rng)};
    std::size_t best = 0;
    for (std::size_t i = 1; i < bs.size(); ++i)
      if (distance(p, bs[i]) < distance(p, bs[best])) best = i;
    REQUIRE(choose_closest(env, p) == best);
  }
}

TEST_CASE("max omni SINR", "[policies]") {
  RadioConfig radio;
  const Environment one = flat_world({{400.0, 500.0}});
  const LinkTable t1 = compute_links(one, radio, {500.0, 500.0}, 100.0);
  REQUIRE(choose_max_omni_sinr(t1, select_candidates(t1, 2), radio) == 0);
  REQUIRE(omni_sinr(t1, radio)[0] == Approx(t1[0].rx_power_w / radio.noise_w));

  Rng rng(2);
  int differs = 0;
  for (std::uint64_t s = 1; s <= 15; ++s) {
    EnvConfig ec;
    ec.rng_seed = s;
    const Environment env = generate_environment(ec);
    const LinkTable t = compute_links(env, radio, {5000.0 * uniform01(rng), 5000.0 * uniform01(rng)}, 100.0);
    const CandidateSet c = select_candidates(t, 10);
    double total = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) total += t[i].rx_power_w;
    std::size_t best = c.ids[0], best_dir = c.ids[0];
    for (std::size_t id : c.ids) {
      const double sv = t[id].rx_power_w / (total - t[id].rx_power_w + radio.noise_w);
      const double sb = t[best].rx_power_w / (total - t[best].rx_power_w + radio.noise_w);
      if (sv > sb) best = id;
      if (directional_sinr(t, env, radio, id) > directional_sinr(t, env, radio, best_dir)) best_dir = id;
    }
    REQUIRE(choose_max_omni_sinr(t, c, radio) == best);
    differs += best != best_dir ? 1 : 0;
  }
  // Omni measurements are a poor guide to directional quality.
  REQUIRE(differs > 0);
}

TEST_CASE("shortest mean distance", "[policies]") {
  // Path from (100, 500) heading east for 990 m.
  const Trajectory traj = straight({100.0, 500.0}, 0.0, 100);
  const Environment env = flat_world({{1090.0, 550.0}, {595.0, 550.0}});
  REQUIRE(choose_mean_distance(env, traj) == 1);

  Rng rng(3);
  std::vector<Vec2> bs;
  for (int i = 0; i < 40; ++i) bs.push_back({2000.0 * uniform01(rng), 2000.0 * uniform01(rng)});
  const Environment rnd = flat_world(bs);
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t i = 0; i < bs.size(); ++i) {
    double sum = 0.0;
    for (Vec2 w : traj.waypoints) sum += distance(w, bs[i]);
    if (sum < best) best = sum, arg = i;
  }
  REQUIRE(choose_mean_distance(rnd, traj) == arg);
}

TEST_CASE("angle aligned", "[policies]") {
  const Trajectory traj = straight({500.0, 500.0}, 0.0, 10);
  REQUIRE(choose_angle_aligned(flat_world({{500.0, 900.0}, {900.0, 500.0}}), traj) == 1);
  const double ten = deg_to_rad(10.0);
  REQUIRE(choose_angle_aligned(flat_world({{100.0, 500.0}, {500.0 + 300.0 * std::cos(ten), 500.0 + 300.0 * std::sin(ten)}}),
                               traj) == 1);
  Rng rng(4);
  std::vector<Vec2> bs;
  for (int i = 0; i < 40; ++i) bs.push_back({2000.0 * uniform01(rng), 2000.0 * uniform01(rng)});
  const Trajectory diag = straight({700.0, 300.0}, 1.1, 10);
  std::size_t arg = 0;
  double best = 10.0;
  for (std::size_t i = 0; i < bs.size(); ++i) {
    const double d = std::abs(std::remainder(std::atan2(bs[i].y - 300.0, bs[i].x - 700.0) - 1.1, 2 * std::numbers::pi));
    if (d < best) best = d, arg = i;
  }
  REQUIRE(choose_angle_aligned(flat_world(bs), diag) == arg);
}

TEST_CASE("IPNN-only picks the quietest candidate", "[policies]") {
  const IpnnModel& m = quick_model();
  StateFeatures s;
  s.xi = 3;
  s.gamma_m = 100.0;
  s.candidate_ids = {5, 6, 7};
  s.p_zeta = {1e-9, 1e-9, 1e-9};
  s.o_zeta = {0, 0, 0};
  s.f_zeta.assign(9, 0.0);
  s.l_zeta.assign(9, 0);
  s.mask.assign(9, 0);
  s.row_count = {2, 0, 1};
  for (std::size_t j = 0; j < 2; ++j) {
    s.f_zeta[s.at(0, j)] = 200.0 + 100.0 * j;
    s.l_zeta[s.at(0, j)] = 1;
    s.mask[s.at(0, j)] = 1;
  }
  s.f_zeta[s.at(2, 0)] = 300.0;
  s.l_zeta[s.at(2, 0)] = 1;
  s.mask[s.at(2, 0)] = 1;
  REQUIRE(choose_ipnn_only(m, s) == 6);

  // Fill row 1; row 2 now holds the fewest LoS interferers.
  s.row_count[1] = 2;
  for (std::size_t j = 0; j < 2; ++j) {
    s.f_zeta[s.at(1, j)] = 250.0 + 50.0 * j;
    s.l_zeta[s.at(1, j)] = 1;
    s.mask[s.at(1, j)] = 1;
  }
  const std::vector<double> sums = estimate_interference(m, s);
  const auto expect = static_cast<std::size_t>(std::min_element(sums.begin(), sums.end()) - sums.begin());
  REQUIRE(expect == 2);
  REQUIRE(choose_ipnn_only(m, s) == s.candidate_ids[expect]);
  REQUIRE(choose_ipnn_only(m, s) == choose_ipnn_only(m, s));
}

TEST_CASE("REQIBA follows the agent's Q-values", "[policies]") {
  const IpnnModel& m = quick_model();
  AgentConfig cfg;
  cfg.batch_size = 64;
  cfg.buffer_capacity = 128;
  Agent agent(cfg);
  for (auto* stream : {&agent.eval_net().value(), &agent.eval_net().advantage()}) {
    for (nn::DenseLayer& l : stream->layers()) {
      l.weights.setZero();
      l.bias.setZero();
    }
  }
  agent.eval_net().advantage().layers().back().bias(2) = 5.0;
  agent.set_epsilon(0.0);

  EnvConfig ec;
  ec.rng_seed = 5;
  const Environment env = generate_environment(ec);
  const RadioConfig radio;
  const LinkTable t = compute_links(env, radio, {2500.0, 2500.0}, 100.0);
  const CandidateSet c = select_candidates(t, 10);
  const StateFeatures s = build_state(t, env, radio, c, std::nullopt, false, 125);
  const ReqibaChoice pick = choose_reqiba(agent, m, s, radio, true);
  REQUIRE(pick.slot == 2);
  REQUIRE(pick.bs_id == c.ids[2]);

  Agent fresh(cfg);
  fresh.set_epsilon(1.0);
  for (int i = 0; i < 200; ++i) {
    const ReqibaChoice r = choose_reqiba(fresh, m, s, radio, true);
    REQUIRE(std::find(c.ids.begin(), c.ids.end(), r.bs_id) != c.ids.end());
  }
  Agent a1(cfg), a2(cfg);
  for (int i = 0; i < 20; ++i) REQUIRE(choose_reqiba(a1, m, s, radio, true).bs_id == choose_reqiba(a2, m, s, radio, true).bs_id);
}

TEST_CASE("fixed-BS policies never hand over", "[policies]") {
  ScenarioConfig cfg;
  cfg.trajectory.turn_prob = 0.5;
  for (std::uint64_t k = 0; k < 10; ++k) {
    const Trial trial = make_trial(cfg, 77, k);
    for (auto make : {make_mean_distance_policy, make_angle_aligned_policy}) {
      auto p = make();
      const EpisodeRecord rec = run_episode(trial, cfg.radio, *p, cfg.xi);
      REQUIRE(rec.handovers == 0);
      for (std::size_t id : rec.assoc) REQUIRE(id == rec.assoc.front());
    }
  }
}

TEST_CASE("policy names", "[policies]") {
  for (PolicyKind k : {PolicyKind::Closest, PolicyKind::MaxOmniSinr, PolicyKind::MeanDistance, PolicyKind::AngleAligned,
                       PolicyKind::IpnnOnly, PolicyKind::Reqiba}) {
    REQUIRE(policy_from_string(policy_name(k)) == k);
  }
  REQUIRE(parse_policy_list("reqiba,closest") == std::vector<PolicyKind>{PolicyKind::Reqiba, PolicyKind::Closest});
  try {
    policy_from_string("nearest");
    FAIL("expected a usage error");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::Usage);
  }
}
