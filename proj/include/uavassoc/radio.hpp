#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "uavassoc/common.hpp"
#include "uavassoc/env.hpp"

namespace uavassoc {

enum class Channel { Los, Nlos };

struct RadioConfig {
  double tx_power_w = 40.0;
  double nearfield_pathloss_db = -38.4;
  double alpha_los = 2.1;
  double alpha_nlos = 4.0;
  double noise_w = 8e-13;
  int ula_elements = 8;
  double beamwidth_rad = std::numbers::pi / 4.0;
  double handover_penalty = 0.5;

  void validate() const;
  double nearfield_linear() const { return db_to_linear(nearfield_pathloss_db); }
  double alpha(Channel z) const { return z == Channel::Los ? alpha_los : alpha_nlos; }
};

/// Radio quantities of one BS as seen from one UAV position.
struct LinkBudget {
  double r_m = 0.0;        // horizontal distance
  double delta_h_m = 0.0;  // UAV height minus BS height
  double phi_rad = 0.0;    // elevation, arctan(delta_h / r)
  Channel los = Channel::Los;
  double rx_power_w = 0.0;  // at unit UAV-side gain
};

struct RingSector {
  double centre_bearing_rad = 0.0;
  double arc_rad = 0.0;
  double r_min_m = 0.0;
  double r_max_m = std::numeric_limits<double>::infinity();
};

/// BS vertical ULA gain; the removable singularity at sin(phi) = 0 returns n_t.
double ula_gain(double phi_rad, int n_t);

/// Main-lobe gain of the UAV's directional antenna.
double uav_antenna_gain(double beamwidth_rad);

/// Illuminated ring sector when the UAV at height `uav_height_m` points at a
/// BS `r_s_m` away horizontally. The bearing is left at zero.
RingSector ring_sector(double uav_height_m, double bs_height_m, double r_s_m, double beamwidth_rad);

bool in_main_lobe(const RingSector& sector, Vec2 uav_xy, Vec2 bs_xy);

double rx_power(const RadioConfig& cfg, const LinkBudget& link);

/// Geometry plus channel state; computes received power.
LinkBudget make_link(const RadioConfig& cfg, Vec2 uav_xy, double uav_height_m, Vec2 bs_xy, double bs_height_m,
                     Channel los);

double sinr(const RadioConfig& cfg, const LinkBudget& serving, std::span<const LinkBudget> interferers);

double throughput(double sinr_value);
double step_reward(const RadioConfig& cfg, double sinr_value, bool handover_occurred);

/// Every BS evaluated from one UAV position (LoS ray traced once).
struct LinkTable {
  Vec2 uav_xy;
  double uav_height_m = 0.0;
  std::vector<LinkBudget> links;
  std::vector<double> bearing_rad;

  const LinkBudget& operator[](std::size_t i) const { return links[i]; }
  std::size_t size() const { return links.size(); }
};

LinkTable compute_links(const Environment& env, const RadioConfig& cfg, Vec2 uav_xy, double uav_height_m);

/// Ring sector pointed at BS `serving` from the table's UAV position.
RingSector sector_towards(const LinkTable& table, const Environment& env, const RadioConfig& cfg,
                          std::size_t serving);

/// Indices of BSs inside the sector, excluding `serving`, nearest first
/// (ties by index).
std::vector<std::size_t> lobe_members(const LinkTable& table, const RingSector& sector, std::size_t serving);

/// Directional SINR when associated with `serving`; every other in-lobe BS
/// interferes.
double directional_sinr(const LinkTable& table, const Environment& env, const RadioConfig& cfg, std::size_t serving);

}  // namespace uavassoc
