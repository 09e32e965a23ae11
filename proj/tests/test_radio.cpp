#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "uavassoc/radio.hpp"

using namespace uavassoc;
using Catch::Approx;

namespace {

constexpr double pi = std::numbers::pi;

// Array factor as an explicit phasor sum, |sum_k exp(i pi k sin phi)|^2 / N.
double ula_gain_phasor(double phi, int n) {
  std::complex<long double> acc = 0.0L;
  for (int k = 0; k < n; ++k) acc += std::polar(1.0L, static_cast<long double>(pi) * k * std::sin(static_cast<long double>(phi)));
  return static_cast<double>(std::norm(acc) / n);
}

// Depression-angle band test; valid while the beam does not reach nadir.
bool brute_in_lobe(double uav_h, double bs_h, Vec2 uav, Vec2 serving, Vec2 other, double w) {
  const double dh = uav_h - bs_h;
  const double c = std::atan2(dh, distance(uav, serving));
  const double e = std::atan2(dh, distance(uav, other));
  const bool elev = e >= c - w / 2 - 1e-12 && e <= c + w / 2 + 1e-12;
  double az = std::atan2(other.y - uav.y, other.x - uav.x) - std::atan2(serving.y - uav.y, serving.x - uav.x);
  az = std::remainder(az, 2 * pi);
  return elev && std::abs(az) <= w / 2 + 1e-12;
}

}  // namespace

TEST_CASE("ULA gain limits and reference values", "[radio]") {
  REQUIRE(ula_gain(0.0, 8) == Approx(8.0));
  REQUIRE(ula_gain(1e-12, 8) == Approx(8.0));
  REQUIRE(ula_gain(pi / 2, 8) == Approx(0.0).margin(1e-20));
  REQUIRE(ula_gain(0.3, 8) == Approx(ula_gain_phasor(0.3, 8)).epsilon(1e-12));
  for (int n : {1, 2, 5, 8, 16}) {
    for (int i = -50; i <= 50; ++i) {
      const double phi = i * (pi / 100);
      const double g = ula_gain(phi, n);
      REQUIRE(g >= 0.0);
      REQUIRE(g <= n + 1e-9);
      REQUIRE(g == Approx(ula_gain_phasor(phi, n)).margin(1e-9));
    }
  }
  // Continuous across the removable singularity.
  for (double h : {1e-6, 1e-8, 1e-10}) REQUIRE(std::abs(ula_gain(h, 8) - ula_gain(0.0, 8)) < 1e-6);
}

TEST_CASE("UAV antenna gain", "[radio]") {
  REQUIRE(uav_antenna_gain(pi / 4) == Approx(256.0 / pi));
  REQUIRE(uav_antenna_gain(pi / 4) == Approx(81.487).epsilon(1e-4));
  REQUIRE(uav_antenna_gain(pi / 2) == Approx(64.0 / pi));
  REQUIRE(uav_antenna_gain(0.2) == Approx(4.0 * uav_antenna_gain(0.4)));
}

TEST_CASE("ring sector cases", "[radio]") {
  const double w = pi / 6;
  const RingSector mid = ring_sector(100.0, 30.0, 70.0, w);
  REQUIRE(mid.arc_rad == w);
  REQUIRE(mid.r_max_m == Approx(70.0 / std::tan(pi / 6)));
  REQUIRE(mid.r_max_m == Approx(121.24).epsilon(1e-4));
  REQUIRE(mid.r_min_m == Approx(70.0 / std::tan(pi / 3)));
  REQUIRE(mid.r_min_m == Approx(40.415).epsilon(1e-4));

  const RingSector steep = ring_sector(100.0, 30.0, 70.0 / std::tan(deg_to_rad(80.0)), w);
  REQUIRE(steep.r_max_m == Approx(40.415).epsilon(1e-4));
  REQUIRE(steep.r_min_m == 0.0);

  const RingSector shallow = ring_sector(100.0, 30.0, 70.0 / std::tan(deg_to_rad(10.0)), w);
  REQUIRE(std::isinf(shallow.r_max_m));

  const RingSector defaults = ring_sector(100.0, 30.0, 200.0, pi / 4);
  REQUIRE(std::isinf(defaults.r_max_m));
  REQUIRE(defaults.r_min_m == Approx(70.0 / std::tan(std::atan2(70.0, 200.0) + pi / 8)));
}

TEST_CASE("serving BS always lies inside its own ring", "[radio]") {
  Rng rng(2024);
  for (int i = 0; i < 10000; ++i) {
    const double gamma = 20.0 + 180.0 * uniform01(rng);
    if (std::abs(gamma - 30.0) < 1e-3) continue;
    const double rs = 1.0 + 2000.0 * uniform01(rng);
    const double w = 0.05 + 2.5 * uniform01(rng);
    const RingSector s = ring_sector(gamma, 30.0, rs, w);
    REQUIRE(s.r_min_m >= 0.0);
    REQUIRE(s.r_min_m < s.r_max_m);
    REQUIRE(s.r_min_m <= rs * (1 + 1e-12));
    if (std::isfinite(s.r_max_m)) REQUIRE(rs <= s.r_max_m * (1 + 1e-12));
  }
}

TEST_CASE("main-lobe membership", "[radio]") {
  RingSector s = ring_sector(100.0, 30.0, 200.0, pi / 4);
  s.centre_bearing_rad = 0.3;
  const Vec2 uav{1000.0, 1000.0};
  const Vec2 serving = uav + 200.0 * Vec2{std::cos(0.3), std::sin(0.3)};
  REQUIRE(in_main_lobe(s, uav, serving));
  REQUIRE_FALSE(in_main_lobe(s, uav, uav + 200.0 * Vec2{std::cos(0.3 + pi / 4), std::sin(0.3 + pi / 4)}));

  Rng rng(7);
  int inside = 0;
  for (int i = 0; i < 5000; ++i) {
    const double gamma = 40.0 + 160.0 * uniform01(rng);
    const double w = 0.2 + 1.2 * uniform01(rng);
    const double rs = 20.0 + 600.0 * uniform01(rng);
    if (std::atan2(gamma - 30.0, rs) + w / 2 >= pi / 2) continue;
    const double c = 2 * pi * uniform01(rng);
    const Vec2 srv = uav + rs * Vec2{std::cos(c), std::sin(c)};
    RingSector sec = ring_sector(gamma, 30.0, rs, w);
    sec.centre_bearing_rad = c;
    const double r = 1.0 + 1500.0 * uniform01(rng), b = 2 * pi * uniform01(rng);
    const Vec2 other = uav + r * Vec2{std::cos(b), std::sin(b)};
    const bool got = in_main_lobe(sec, uav, other);
    REQUIRE(got == brute_in_lobe(gamma, 30.0, uav, srv, other, w));
    inside += got ? 1 : 0;
  }
  REQUIRE(inside > 100);
}

TEST_CASE("received power", "[radio]") {
  RadioConfig cfg;
  const LinkBudget los = make_link(cfg, {0.0, 0.0}, 100.0, {200.0, 0.0}, 30.0, Channel::Los);
  REQUIRE(los.phi_rad == Approx(std::atan(70.0 / 200.0)).margin(1e-12));
  // Independent link budget in dB.
  const double phi = std::atan(70.0 / 200.0);
  const double mu = ula_gain_phasor(phi, 8);
  const double db = 10 * std::log10(40.0) + 10 * std::log10(mu) - 38.4 - 2.1 * 10 * std::log10(std::hypot(200.0, 70.0));
  REQUIRE(10 * std::log10(los.rx_power_w) == Approx(db).epsilon(1e-10));

  const LinkBudget nlos = make_link(cfg, {0.0, 0.0}, 100.0, {200.0, 0.0}, 30.0, Channel::Nlos);
  REQUIRE(nlos.rx_power_w <= los.rx_power_w);

  RadioConfig two = cfg;
  two.alpha_los = 2.0;
  LinkBudget a{3.0, 4.0, 0.0, Channel::Los, 0.0};
  LinkBudget b{std::sqrt(50.0 - 16.0), 4.0, 0.0, Channel::Los, 0.0};  // r^2 + dh^2 doubled
  REQUIRE(rx_power(two, b) == Approx(0.5 * rx_power(two, a)));
}

TEST_CASE("SINR definition and monotonicity", "[radio]") {
  RadioConfig cfg;
  const double eta = uav_antenna_gain(cfg.beamwidth_rad);
  LinkBudget serving;
  serving.rx_power_w = cfg.noise_w / eta;
  REQUIRE(sinr(cfg, serving, {}) == Approx(1.0));

  serving.rx_power_w = 1e-9;
  LinkBudget i1;
  i1.rx_power_w = 1e-11;
  LinkBudget i2;
  i2.rx_power_w = 3e-12;
  const double s0 = sinr(cfg, serving, {});
  const std::vector<LinkBudget> one{i1}, two{i1, i2};
  REQUIRE(sinr(cfg, serving, one) < s0);
  REQUIRE(sinr(cfg, serving, two) < sinr(cfg, serving, one));
  REQUIRE(sinr(cfg, serving, two) == Approx(eta * 1e-9 / (eta * (1e-11 + 3e-12) + cfg.noise_w)));
}

TEST_CASE("SINR on a three-BS hand scene", "[radio]") {
  EnvConfig ec;
  ec.area_side_m = 1000.0;
  BuildingGrid g;
  g.pitch_m = 100.0;
  g.footprint_m = 10.0;
  g.cells_per_side = 10;
  g.heights_m.assign(100, 0.0);
  const Environment env(ec, {{700.0, 500.0}, {800.0, 520.0}, {500.0, 900.0}}, g);
  RadioConfig cfg;
  const Vec2 uav{500.0, 500.0};
  const LinkTable t = compute_links(env, cfg, uav, 100.0);
  // Serving BS 0 at 200 m east; BS 1 at ~301 m within 22.5 degrees; BS 2 north.
  const double eta = 256.0 / pi;
  auto p = [&](Vec2 bs) {
    const double r = distance(uav, bs);
    return 40.0 * ula_gain_phasor(std::atan2(70.0, r), 8) * std::pow(10.0, -3.84) * std::pow(r * r + 4900.0, -1.05);
  };
  const double expect = eta * p({700.0, 500.0}) / (eta * p({800.0, 520.0}) + cfg.noise_w);
  REQUIRE(directional_sinr(t, env, cfg, 0) == Approx(expect).epsilon(1e-10));
  const RingSector s = sector_towards(t, env, cfg, 0);
  REQUIRE(lobe_members(t, s, 0) == std::vector<std::size_t>{1});
}

TEST_CASE("SINR scale consistency", "[radio]") {
  RadioConfig cfg;
  cfg.noise_w = 1e-300;
  LinkBudget s{150.0, 70.0, std::atan2(70.0, 150.0), Channel::Los, 0.0};
  LinkBudget i{400.0, 70.0, std::atan2(70.0, 400.0), Channel::Nlos, 0.0};
  auto eval = [&](double p) {
    RadioConfig c = cfg;
    c.tx_power_w = p;
    s.rx_power_w = rx_power(c, s);
    i.rx_power_w = rx_power(c, i);
    const std::vector<LinkBudget> is{i};
    return sinr(c, s, is);
  };
  REQUIRE(eval(40.0) == Approx(eval(400.0)).epsilon(1e-12));
}

TEST_CASE("step reward", "[radio]") {
  RadioConfig cfg;
  REQUIRE(step_reward(cfg, 1.0, false) == Approx(1.0));
  REQUIRE(step_reward(cfg, 3.0, true) == Approx(1.0));
  cfg.handover_penalty = 1.0;
  REQUIRE(step_reward(cfg, 7.0, true) == step_reward(cfg, 7.0, false));
  double prev = -1.0;
  for (double s = 0.0; s < 100.0; s += 0.5) {
    const double r = step_reward(cfg, s, false);
    REQUIRE(r >= 0.0);
    REQUIRE(r >= prev);
    prev = r;
  }
}
