#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "uavassoc/common.hpp"

namespace uavassoc {

struct EnvConfig {
  double area_side_m = 5000.0;
  double bs_density_per_km2 = 5.0;
  double bs_height_m = 30.0;
  double building_density_per_km2 = 300.0;
  double building_coverage = 0.5;
  double building_height_scale_m = 20.0;
  std::uint64_t rng_seed = 1;

  /// Throws Error(InvalidConfig) when a field is out of range.
  void validate() const;

  double area_km2() const { return area_side_m * area_side_m * 1e-6; }
  double building_pitch_m() const;
  double building_footprint_m() const;
};

/// Square buildings centred on a regular grid. Cell (ix, iy) spans
/// [ix*pitch, (ix+1)*pitch) x [iy*pitch, (iy+1)*pitch) and holds one
/// footprint of side `footprint_m` at its centre.
struct BuildingGrid {
  double pitch_m = 0.0;
  double footprint_m = 0.0;
  int cells_per_side = 0;
  std::vector<double> heights_m;  // row-major, ix fastest
  double max_height_m = 0.0;

  double height(int ix, int iy) const {
    return heights_m[static_cast<std::size_t>(iy) * cells_per_side + ix];
  }
  Vec2 centre(int ix, int iy) const {
    return {(ix + 0.5) * pitch_m, (iy + 0.5) * pitch_m};
  }
  std::size_t size() const { return heights_m.size(); }
};

/// Immutable sampled world. Safe to share read-only across threads.
class Environment {
 public:
  Environment(EnvConfig cfg, std::vector<Vec2> bs_xy, BuildingGrid grid);

  const EnvConfig& config() const { return cfg_; }
  std::span<const Vec2> bs_positions() const { return bs_xy_; }
  std::size_t bs_count() const { return bs_xy_.size(); }
  Vec2 bs(std::size_t i) const { return bs_xy_[i]; }
  Point3 bs_point(std::size_t i) const { return {bs_xy_[i].x, bs_xy_[i].y, cfg_.bs_height_m}; }
  const BuildingGrid& buildings() const { return grid_; }
  double side() const { return cfg_.area_side_m; }
  bool contains(Vec2 p) const;

  /// Line-of-sight test between two 3D points. Exact traversal of the
  /// footprints crossed by the horizontal projection; a footprint blocks
  /// when its height reaches the lowest altitude of the segment over the
  /// crossing interval.
  bool is_los(const Point3& a, const Point3& b) const;

 private:
  EnvConfig cfg_;
  std::vector<Vec2> bs_xy_;
  BuildingGrid grid_;
};

Environment generate_environment(const EnvConfig& cfg);

/// Plain-text serialisation for replay and debugging.
void write_environment(std::ostream& os, const Environment& env);
Environment read_environment(std::istream& is);

struct Trajectory {
  std::vector<Vec2> waypoints;
  std::vector<double> headings_rad;  // heading used to reach waypoint t+1 from t
  double uav_height_m = 100.0;
  double step_duration_s = 1.0;
  double speed_mps = 10.0;
  int boundary_corrections = 0;  // moves replaced to stay inside the area
  int wide_corrections = 0;      // of which needed more than a 30 degree turn

  std::size_t size() const { return waypoints.size(); }
  double step_length() const { return speed_mps * step_duration_s; }
  Point3 point(std::size_t t) const { return {waypoints[t].x, waypoints[t].y, uav_height_m}; }
};

struct TrajectoryOptions {
  double uav_height_m = 100.0;
  int timesteps = 100;
  double turn_prob = 0.0;
  double speed_mps = 10.0;
  double step_duration_s = 1.0;
  double start_margin_m = 100.0;
  double turn_angle_rad = std::numbers::pi / 6.0;
};

/// Straight or randomly turning flight path. Throws Error(Infeasible) when
/// the area cannot hold a straight path of the requested length.
Trajectory generate_trajectory(const Environment& env, const TrajectoryOptions& opts, Rng& rng);

}  // namespace uavassoc
