#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "uavassoc/env.hpp"
#include "uavassoc/radio.hpp"

namespace uavassoc {

/// LoS probability as a function of horizontal distance. Either the
/// ITU building-crossing product or a tabulated Monte-Carlo estimate from
/// sampled environments.
class LosProbability {
 public:
  enum class Variant { Itu, Empirical };

  /// P(r) = prod_{n<b} [1 - exp(-(h_n)^2 / (2 kappa^2))], b = floor(r_km sqrt(beta delta)),
  /// h_n the ray height above ground at the n-th crossed building.
  static LosProbability itu(double uav_height_m, double bs_height_m, double building_density_per_km2,
                            double building_coverage, double building_height_scale_m);
  static LosProbability itu(const EnvConfig& env, double uav_height_m);

  /// Piecewise-linear through (r_grid, p); held flat beyond the last node.
  static LosProbability tabulated(std::vector<double> r_grid, std::vector<double> p);

  Variant variant() const { return variant_; }
  double operator()(double r_m) const;

  /// Radii in (0, r_max) where the function is not smooth.
  std::vector<double> breakpoints(double r_max_m) const;

 private:
  Variant variant_ = Variant::Itu;
  double uav_h_ = 0.0, bs_h_ = 0.0, crossings_per_m_ = 0.0, kappa_ = 1.0;
  std::vector<double> r_grid_, p_;
};

/// Frequency of LoS links between a UAV at the area centre and a point at
/// horizontal distance r in a uniform direction, one fresh environment per
/// sample. Parallel over samples; identical to the serial result.
std::vector<double> estimate_empirical_los(const EnvConfig& env, double uav_height_m, const std::vector<double>& r_grid,
                                           int samples_per_r, std::uint64_t seed, bool parallel);

struct FadingConfig {
  int m = 1;  // Nakagami shape, shared by serving and interfering links
  double r_s_m = 200.0;
  double uav_height_m = 100.0;
  Channel serving = Channel::Los;
  RadioConfig radio;
  EnvConfig env;  // BS density and height; the area diagonal truncates the sector
  LosProbability los = LosProbability::itu(EnvConfig{}, 100.0);
  double rel_tol = 1e-6;

  void validate() const;
  /// Interferer region: ring sector aimed at the serving BS, outer radius
  /// capped at the area diagonal.
  RingSector sector() const;
  double r_max_m() const;
  /// Mean received power of the serving link through the directional antenna.
  double serving_power_w() const;
};

struct LaplaceInfo {
  double tail_bound = 0.0;   // upper bound on the exponent mass beyond r_max
  double abs_error = 0.0;    // quadrature error estimate of the exponent
  long evaluations = 0;
};

/// E[exp(-w I_j)] for the LoS or NLoS interferers of the sector under
/// unit-mean Gamma(m) fading. Throws Error(IntegrationFailure) when the
/// adaptive rule does not reach the tolerance.
double laplace_interference(const FadingConfig& cfg, double w, Channel j, LaplaceInfo* info = nullptr);

/// Derivatives d^k/dw^k of log L_j(w) for k = 1..order, computed exactly
/// under the integral.
std::vector<double> log_laplace_derivatives(const FadingConfig& cfg, double w, Channel j, int order);

/// P(SINR <= y).
double sinr_cdf(const FadingConfig& cfg, double y);

/// Empirical CDF of simulated SINR at each y. Samples are split into fixed
/// shards with their own RNG streams, so the parallel and serial forms agree
/// bit for bit.
std::vector<double> mc_sinr_cdf(const FadingConfig& cfg, const std::vector<double>& y_grid, long n_samples,
                                std::uint64_t seed, bool parallel);

/// Monte-Carlo mean of exp(-w I_j) for checking the transform.
double mc_laplace(const FadingConfig& cfg, double w, Channel j, long n_samples, std::uint64_t seed, bool parallel);

/// max_i |a_i - b_i|.
double ks_distance(const std::vector<double>& a, const std::vector<double>& b);

struct QuadResult {
  double value = 0.0;
  double abs_error = 0.0;
  long evaluations = 0;
};
/// Globally adaptive Gauss-Kronrod (7, 15) on [a, b]: the interval with the
/// largest error estimate is bisected until the total error meets the
/// tolerance. Throws Error(IntegrationFailure) after `max_intervals`.
QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b, double rel_tol,
                              double abs_tol = 0.0, int max_intervals = 2000);

/// Nested adaptive rule over the polar region r in [r0, r1], theta in
/// [t0, t1], area element r dr dtheta.
QuadResult integrate_polar(const std::function<double(double, double)>& f, double r0, double r1, double t0,
                           double t1, const std::vector<double>& r_breaks, double rel_tol, double abs_tol = 0.0);

}  // namespace uavassoc
