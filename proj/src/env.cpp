#include "uavassoc/env.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace uavassoc {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::Divergence: return "non-finite-loss";
    case ErrorKind::CorruptFile: return "corrupt-file";
    case ErrorKind::TopologyMismatch: return "topology-mismatch";
    case ErrorKind::InsufficientBs: return "insufficient-bs";
    case ErrorKind::InsufficientBuffer: return "insufficient-buffer";
    case ErrorKind::IntegrationFailure: return "integration-failure";
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

void EnvConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); };
  if (!(area_side_m > 0.0)) fail("area_side_m must be > 0");
  if (!(bs_density_per_km2 > 0.0)) fail("bs_density_per_km2 must be > 0");
  if (!(building_density_per_km2 > 0.0)) fail("building_density_per_km2 must be > 0");
  if (!(building_coverage > 0.0 && building_coverage < 1.0)) fail("building_coverage must lie in (0, 1)");
  if (!(building_height_scale_m >= 0.0)) fail("building_height_scale_m must be >= 0");
  if (!std::isfinite(bs_height_m)) fail("bs_height_m must be finite");
}

double EnvConfig::building_pitch_m() const { return 1000.0 / std::sqrt(building_density_per_km2); }

double EnvConfig::building_footprint_m() const {
  return 1000.0 * std::sqrt(building_coverage / building_density_per_km2);
}

Environment::Environment(EnvConfig cfg, std::vector<Vec2> bs_xy, BuildingGrid grid)
    : cfg_(cfg), bs_xy_(std::move(bs_xy)), grid_(std::move(grid)) {}

bool Environment::contains(Vec2 p) const {
  return p.x >= 0.0 && p.y >= 0.0 && p.x <= cfg_.area_side_m && p.y <= cfg_.area_side_m;
}

namespace {

// Parameter interval of p0 + t*d, t in [0,1], inside the axis-aligned square.
bool clip_to_square(Vec2 p0, Vec2 d, Vec2 lo, Vec2 hi, double& t0, double& t1) {
  t0 = 0.0;
  t1 = 1.0;
  const double p[2] = {p0.x, p0.y};
  const double dd[2] = {d.x, d.y};
  const double l[2] = {lo.x, lo.y};
  const double h[2] = {hi.x, hi.y};
  for (int k = 0; k < 2; ++k) {
    if (std::abs(dd[k]) < 1e-15) {
      if (p[k] < l[k] || p[k] > h[k]) return false;
      continue;
    }
    double ta = (l[k] - p[k]) / dd[k];
    double tb = (h[k] - p[k]) / dd[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

bool Environment::is_los(const Point3& a, const Point3& b) const {
  const BuildingGrid& g = grid_;
  if (g.cells_per_side == 0) return true;
  if (std::min(a.z, b.z) > g.max_height_m) return true;

  const Vec2 p0 = a.xy();
  const Vec2 d = b.xy() - p0;
  const double half = 0.5 * g.footprint_m;
  const int n = g.cells_per_side;

  auto blocks = [&](int ix, int iy) {
    if (ix < 0 || iy < 0 || ix >= n || iy >= n) return false;
    const Vec2 c = g.centre(ix, iy);
    double t0 = 0.0, t1 = 1.0;
    if (!clip_to_square(p0, d, {c.x - half, c.y - half}, {c.x + half, c.y + half}, t0, t1)) return false;
    const double z0 = a.z + t0 * (b.z - a.z);
    const double z1 = a.z + t1 * (b.z - a.z);
    return g.height(ix, iy) >= std::min(z0, z1);
  };

  int ix = static_cast<int>(std::floor(p0.x / g.pitch_m));
  int iy = static_cast<int>(std::floor(p0.y / g.pitch_m));
  if (std::abs(d.x) < 1e-12 && std::abs(d.y) < 1e-12) return !blocks(ix, iy);

  // Amanatides-Woo traversal over grid cells, parameterised by t in [0, 1].
  const int step_x = d.x > 0 ? 1 : (d.x < 0 ? -1 : 0);
  const int step_y = d.y > 0 ? 1 : (d.y < 0 ? -1 : 0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  double t_max_x = inf, t_max_y = inf, t_delta_x = inf, t_delta_y = inf;
  if (step_x != 0) {
    const double boundary = (ix + (step_x > 0 ? 1 : 0)) * g.pitch_m;
    t_max_x = (boundary - p0.x) / d.x;
    t_delta_x = g.pitch_m / std::abs(d.x);
  }
  if (step_y != 0) {
    const double boundary = (iy + (step_y > 0 ? 1 : 0)) * g.pitch_m;
    t_max_y = (boundary - p0.y) / d.y;
    t_delta_y = g.pitch_m / std::abs(d.y);
  }
  for (;;) {
    if (blocks(ix, iy)) return false;
    if (t_max_x < t_max_y) {
      if (t_max_x > 1.0) break;
      ix += step_x;
      t_max_x += t_delta_x;
    } else {
      if (t_max_y > 1.0) break;
      iy += step_y;
      t_max_y += t_delta_y;
    }
  }
  return true;
}

Environment generate_environment(const EnvConfig& cfg) {
  cfg.validate();
  Rng bs_rng = make_rng(cfg.rng_seed, 0);
  Rng building_rng = make_rng(cfg.rng_seed, 1);

  std::poisson_distribution<long> count_dist(cfg.bs_density_per_km2 * cfg.area_km2());
  const long count = count_dist(bs_rng);
  std::vector<Vec2> bs;
  bs.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) {
    const double x = cfg.area_side_m * uniform01(bs_rng);
    const double y = cfg.area_side_m * uniform01(bs_rng);
    bs.push_back({x, y});
  }

  BuildingGrid grid;
  grid.pitch_m = cfg.building_pitch_m();
  grid.footprint_m = cfg.building_footprint_m();
  grid.cells_per_side = static_cast<int>(std::ceil(cfg.area_side_m / grid.pitch_m - 1e-9));
  grid.heights_m.resize(static_cast<std::size_t>(grid.cells_per_side) * grid.cells_per_side);
  for (double& h : grid.heights_m) {
    // Rayleigh(kappa) by inversion.
    h = cfg.building_height_scale_m * std::sqrt(-2.0 * std::log1p(-uniform01(building_rng)));
    grid.max_height_m = std::max(grid.max_height_m, h);
  }
  return Environment(cfg, std::move(bs), std::move(grid));
}

void write_environment(std::ostream& os, const Environment& env) {
  const EnvConfig& c = env.config();
  const BuildingGrid& g = env.buildings();
  std::ostringstream out;
  out.precision(17);
  out << "uavassoc-environment 1\n";
  out << "area_side_m " << c.area_side_m << '\n';
  out << "bs_density_per_km2 " << c.bs_density_per_km2 << '\n';
  out << "bs_height_m " << c.bs_height_m << '\n';
  out << "building_density_per_km2 " << c.building_density_per_km2 << '\n';
  out << "building_coverage " << c.building_coverage << '\n';
  out << "building_height_scale_m " << c.building_height_scale_m << '\n';
  out << "rng_seed " << c.rng_seed << '\n';
  out << "bs_count " << env.bs_count() << '\n';
  for (Vec2 p : env.bs_positions()) out << p.x << ' ' << p.y << '\n';
  out << "grid_pitch_m " << g.pitch_m << '\n';
  out << "grid_footprint_m " << g.footprint_m << '\n';
  out << "grid_cells_per_side " << g.cells_per_side << '\n';
  out << "heights " << g.heights_m.size() << '\n';
  for (double h : g.heights_m) out << h << '\n';
  out << "end\n";
  os << out.str();
}

namespace {

template <class T>
T read_field(std::istream& is, const std::string& key) {
  std::string k;
  T value{};
  if (!(is >> k) || k != key || !(is >> value)) {
    throw Error(ErrorKind::CorruptFile, "environment file: expected '" + key + "'");
  }
  return value;
}

}  // namespace

Environment read_environment(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "uavassoc-environment" || version != 1) {
    throw Error(ErrorKind::CorruptFile, "environment file: bad header");
  }
  EnvConfig c;
  c.area_side_m = read_field<double>(is, "area_side_m");
  c.bs_density_per_km2 = read_field<double>(is, "bs_density_per_km2");
  c.bs_height_m = read_field<double>(is, "bs_height_m");
  c.building_density_per_km2 = read_field<double>(is, "building_density_per_km2");
  c.building_coverage = read_field<double>(is, "building_coverage");
  c.building_height_scale_m = read_field<double>(is, "building_height_scale_m");
  c.rng_seed = read_field<std::uint64_t>(is, "rng_seed");
  const auto count = read_field<std::size_t>(is, "bs_count");
  std::vector<Vec2> bs(count);
  for (Vec2& p : bs) {
    if (!(is >> p.x >> p.y)) throw Error(ErrorKind::CorruptFile, "environment file: truncated bs list");
  }
  BuildingGrid g;
  g.pitch_m = read_field<double>(is, "grid_pitch_m");
  g.footprint_m = read_field<double>(is, "grid_footprint_m");
  g.cells_per_side = read_field<int>(is, "grid_cells_per_side");
  const auto n_heights = read_field<std::size_t>(is, "heights");
  if (n_heights != static_cast<std::size_t>(g.cells_per_side) * g.cells_per_side) {
    throw Error(ErrorKind::CorruptFile, "environment file: height count does not match grid");
  }
  g.heights_m.resize(n_heights);
  for (double& h : g.heights_m) {
    if (!(is >> h)) throw Error(ErrorKind::CorruptFile, "environment file: truncated heights");
    g.max_height_m = std::max(g.max_height_m, h);
  }
  std::string end;
  if (!(is >> end) || end != "end") throw Error(ErrorKind::CorruptFile, "environment file: missing end marker");
  return Environment(c, std::move(bs), std::move(g));
}

Trajectory generate_trajectory(const Environment& env, const TrajectoryOptions& opts, Rng& rng) {
  if (opts.timesteps < 2) throw Error(ErrorKind::InvalidConfig, "trajectory needs at least 2 timesteps");
  if (!(opts.turn_prob >= 0.0 && opts.turn_prob <= 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "turn_prob must lie in [0, 1]");
  }
  Trajectory traj;
  traj.uav_height_m = opts.uav_height_m;
  traj.speed_mps = opts.speed_mps;
  traj.step_duration_s = opts.step_duration_s;
  const double step = traj.step_length();
  const double length = (opts.timesteps - 1) * step;
  const double side = env.side();
  const double usable = side - 2.0 * opts.start_margin_m;
  if (usable <= 0.0 || length > usable * std::numbers::sqrt2) {
    throw Error(ErrorKind::Infeasible, "area too small for a path of " + std::to_string(length) + " m");
  }

  auto inside_margin = [&](Vec2 p) {
    return p.x >= opts.start_margin_m && p.y >= opts.start_margin_m && p.x <= side - opts.start_margin_m &&
           p.y <= side - opts.start_margin_m;
  };
  Vec2 start;
  double heading = 0.0;
  bool found = false;
  for (int attempt = 0; attempt < 100000 && !found; ++attempt) {
    start = {opts.start_margin_m + usable * uniform01(rng), opts.start_margin_m + usable * uniform01(rng)};
    heading = wrap_angle(2.0 * std::numbers::pi * uniform01(rng));
    const Vec2 end = start + length * Vec2{std::cos(heading), std::sin(heading)};
    found = inside_margin(end);
  }
  if (!found) throw Error(ErrorKind::Infeasible, "could not place a straight path inside the area");

  traj.waypoints.reserve(static_cast<std::size_t>(opts.timesteps));
  traj.headings_rad.reserve(static_cast<std::size_t>(opts.timesteps - 1));
  traj.waypoints.push_back(start);
  const double turn = opts.turn_angle_rad;
  for (int t = 1; t < opts.timesteps; ++t) {
    double preferred = 0.0;
    if (t > 1 && opts.turn_prob > 0.0 && uniform01(rng) < opts.turn_prob) {
      preferred = uniform01(rng) < 0.5 ? turn : -turn;
    }
    const Vec2 prev = traj.waypoints.back();
    auto next_point = [&](double change) {
      const double h = heading + change;
      return prev + step * Vec2{std::cos(h), std::sin(h)};
    };
    double chosen = preferred;
    if (!env.contains(next_point(preferred))) {
      ++traj.boundary_corrections;
      // Opposite turn first, then progressively wider turns.
      const double sign = preferred < 0.0 ? -1.0 : 1.0;
      std::vector<double> options;
      if (preferred != 0.0) options.push_back(-preferred);
      for (int k = 1; k <= 6; ++k) {
        options.push_back(sign * k * turn);
        options.push_back(-sign * k * turn);
      }
      chosen = options.back();
      for (double o : options) {
        if (env.contains(next_point(o))) {
          chosen = o;
          break;
        }
      }
      if (std::abs(chosen) > turn + 1e-12) ++traj.wide_corrections;
    }
    heading = wrap_angle(heading + chosen);
    traj.headings_rad.push_back(heading);
    traj.waypoints.push_back(prev + step * Vec2{std::cos(heading), std::sin(heading)});
  }
  return traj;
}

}  // namespace uavassoc
