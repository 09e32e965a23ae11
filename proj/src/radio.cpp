#include "uavassoc/radio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace uavassoc {

void RadioConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); };
  if (!(tx_power_w > 0.0)) fail("tx_power_w must be > 0");
  if (!(alpha_los >= 2.0 && alpha_nlos >= 2.0)) fail("pathloss exponents must be >= 2");
  if (!(noise_w > 0.0)) fail("noise_w must be > 0");
  if (ula_elements < 1) fail("ula_elements must be >= 1");
  if (!(beamwidth_rad > 0.0 && beamwidth_rad < std::numbers::pi)) fail("beamwidth_rad must lie in (0, pi)");
  if (!(handover_penalty >= 0.0 && handover_penalty <= 1.0)) fail("handover_penalty must lie in [0, 1]");
}

double ula_gain(double phi_rad, int n_t) {
  const double s = std::sin(phi_rad);
  if (std::abs(s) < 1e-9) return static_cast<double>(n_t);
  const double half_pi = 0.5 * std::numbers::pi;
  const double num = std::sin(n_t * half_pi * s);
  const double den = std::sin(half_pi * s);
  return (num * num) / (den * den) / n_t;
}

double uav_antenna_gain(double beamwidth_rad) {
  return 16.0 * std::numbers::pi / (beamwidth_rad * beamwidth_rad);
}

RingSector ring_sector(double uav_height_m, double bs_height_m, double r_s_m, double beamwidth_rad) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double half_pi = 0.5 * std::numbers::pi;
  const double dh = std::abs(uav_height_m - bs_height_m);
  const double phi = std::atan2(dh, r_s_m);
  const double half_w = 0.5 * beamwidth_rad;

  RingSector s;
  s.arc_rad = beamwidth_rad;
  if (phi > half_w && phi < half_pi - half_w) {
    s.r_max_m = dh / std::tan(phi - half_w);
  } else if (phi > half_pi - half_w) {
    const double far_edge = half_pi - beamwidth_rad;
    s.r_max_m = far_edge > 0.0 ? dh / std::tan(far_edge) : inf;
  } else {
    s.r_max_m = inf;
  }
  s.r_min_m = phi < half_pi - half_w ? dh / std::tan(phi + half_w) : 0.0;
  return s;
}

bool in_main_lobe(const RingSector& sector, Vec2 uav_xy, Vec2 bs_xy) {
  const double d = distance(uav_xy, bs_xy);
  if (d < sector.r_min_m || d > sector.r_max_m) return false;
  if (d == 0.0) return true;
  const double offset = wrap_angle(bearing(uav_xy, bs_xy) - sector.centre_bearing_rad);
  return std::abs(offset) <= 0.5 * sector.arc_rad;
}

double rx_power(const RadioConfig& cfg, const LinkBudget& link) {
  const double d2 = link.r_m * link.r_m + link.delta_h_m * link.delta_h_m;
  return cfg.tx_power_w * ula_gain(link.phi_rad, cfg.ula_elements) * cfg.nearfield_linear() *
         std::pow(d2, -0.5 * cfg.alpha(link.los));
}

LinkBudget make_link(const RadioConfig& cfg, Vec2 uav_xy, double uav_height_m, Vec2 bs_xy, double bs_height_m,
                     Channel los) {
  LinkBudget l;
  l.r_m = distance(uav_xy, bs_xy);
  l.delta_h_m = uav_height_m - bs_height_m;
  l.phi_rad = std::atan2(l.delta_h_m, l.r_m);
  l.los = los;
  l.rx_power_w = rx_power(cfg, l);
  return l;
}

double sinr(const RadioConfig& cfg, const LinkBudget& serving, std::span<const LinkBudget> interferers) {
  const double eta = uav_antenna_gain(cfg.beamwidth_rad);
  double interference = 0.0;
  for (const LinkBudget& l : interferers) interference += eta * l.rx_power_w;
  return eta * serving.rx_power_w / (interference + cfg.noise_w);
}

double throughput(double sinr_value) { return std::log2(1.0 + sinr_value); }

double step_reward(const RadioConfig& cfg, double sinr_value, bool handover_occurred) {
  const double r = throughput(sinr_value);
  return handover_occurred ? cfg.handover_penalty * r : r;
}

LinkTable compute_links(const Environment& env, const RadioConfig& cfg, Vec2 uav_xy, double uav_height_m) {
  LinkTable t;
  t.uav_xy = uav_xy;
  t.uav_height_m = uav_height_m;
  const std::size_t n = env.bs_count();
  t.links.resize(n);
  t.bearing_rad.resize(n);
  const Point3 uav{uav_xy.x, uav_xy.y, uav_height_m};
  const double bs_h = env.config().bs_height_m;
  for (std::size_t i = 0; i < n; ++i) {
    const Channel z = env.is_los(uav, env.bs_point(i)) ? Channel::Los : Channel::Nlos;
    t.links[i] = make_link(cfg, uav_xy, uav_height_m, env.bs(i), bs_h, z);
    t.bearing_rad[i] = bearing(uav_xy, env.bs(i));
  }
  return t;
}

RingSector sector_towards(const LinkTable& table, const Environment& env, const RadioConfig& cfg,
                          std::size_t serving) {
  RingSector s =
      ring_sector(table.uav_height_m, env.config().bs_height_m, table.links[serving].r_m, cfg.beamwidth_rad);
  s.centre_bearing_rad = table.bearing_rad[serving];
  return s;
}

std::vector<std::size_t> lobe_members(const LinkTable& table, const RingSector& sector, std::size_t serving) {
  std::vector<std::size_t> out;
  const double half_arc = 0.5 * sector.arc_rad;
  for (std::size_t j = 0; j < table.size(); ++j) {
    if (j == serving) continue;
    const double d = table.links[j].r_m;
    if (d < sector.r_min_m || d > sector.r_max_m) continue;
    if (d > 0.0 && std::abs(wrap_angle(table.bearing_rad[j] - sector.centre_bearing_rad)) > half_arc) continue;
    out.push_back(j);
  }
  std::stable_sort(out.begin(), out.end(),
                   [&](std::size_t a, std::size_t b) { return table.links[a].r_m < table.links[b].r_m; });
  return out;
}

double directional_sinr(const LinkTable& table, const Environment& env, const RadioConfig& cfg,
                        std::size_t serving) {
  const RingSector sector = sector_towards(table, env, cfg, serving);
  const std::vector<std::size_t> members = lobe_members(table, sector, serving);
  std::vector<LinkBudget> interferers;
  interferers.reserve(members.size());
  for (std::size_t j : members) interferers.push_back(table.links[j]);
  return sinr(cfg, table.links[serving], interferers);
}

}  // namespace uavassoc
