#include <catch_amalgamated.hpp>

#include <cmath>

#include "uavassoc/analytic.hpp"

using namespace uavassoc;
using Catch::Approx;

namespace {

std::vector<double> db_grid(double lo, double hi, double step) {
  std::vector<double> y;
  for (double d = lo; d <= hi + 1e-9; d += step) y.push_back(std::pow(10.0, d / 10.0));
  return y;
}

// Serving-power scale that turns a SINR threshold into the transform argument.
double w_of(const FadingConfig& cfg, double y) { return cfg.m * y / cfg.serving_power_w(); }

}  // namespace

TEST_CASE("Gauss-Kronrod quadrature", "[analytic]") {
  const QuadResult a = integrate_adaptive([](double x) { return std::exp(-x) * std::sin(3 * x); }, 0.0, 10.0, 1e-10);
  const double exact = (3.0 - std::exp(-10.0) * (std::sin(30.0) + 3 * std::cos(30.0))) / 10.0;
  REQUIRE(a.value == Approx(exact).epsilon(1e-10));
  const QuadResult kink = integrate_adaptive([](double x) { return std::sqrt(std::abs(x - 0.3)); }, 0.0, 1.0, 1e-8);
  REQUIRE(kink.value == Approx((2.0 / 3.0) * (std::pow(0.3, 1.5) + std::pow(0.7, 1.5))).epsilon(1e-7));
  // Area of an annular sector.
  const QuadResult p = integrate_polar([](double, double) { return 1.0; }, 1.0, 2.0, 0.0, 0.5, {}, 1e-10);
  REQUIRE(p.value == Approx(0.5 * 0.5 * (4.0 - 1.0)).epsilon(1e-10));
  REQUIRE_THROWS_AS(integrate_adaptive([](double x) { return 1.0 / x; }, 0.0, 1.0, 1e-12, 0.0, 50), Error);
}

TEST_CASE("ITU LoS probability", "[analytic]") {
  const LosProbability p = LosProbability::itu(EnvConfig{}, 100.0);
  // sqrt(beta delta) = sqrt(150) buildings per km; below ~81.6 m none are crossed.
  REQUIRE(p(0.0) == 1.0);
  REQUIRE(p(50.0) == 1.0);
  double prev = 1.0;
  for (int k = 0; k < 20; ++k) {
    const double v = p(100.0 * k);
    REQUIRE(v >= 0.0);
    REQUIRE(v <= prev);
    prev = v;
  }
  // One crossing at mid height.
  const double h = 100.0 - 0.5 * 70.0;
  REQUIRE(p(100.0) == Approx(1.0 - std::exp(-h * h / (2 * 400.0))));
  const LosProbability t = LosProbability::tabulated({0.0, 100.0, 200.0}, {1.0, 0.5, 0.2});
  REQUIRE(t(50.0) == Approx(0.75));
  REQUIRE(t(1000.0) == Approx(0.2));
}

TEST_CASE("empirical LoS against the ITU product", "[analytic]") {
  const EnvConfig env;
  const std::vector<double> r{100.0, 200.0, 300.0, 400.0, 600.0};
  const int n = 10000;
  const double band = 2.0 * 1.959963984540054 * std::sqrt(0.25 / n);
  const std::vector<double> low = estimate_empirical_los(env, 60.0, r, n, 3, true);
  const std::vector<double> mid = estimate_empirical_los(env, 100.0, r, n, 4, true);
  const LosProbability itu = LosProbability::itu(env, 100.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    // Oblique rays and a BS standing inside a footprint only add blockage.
    REQUIRE(mid[i] <= itu(r[i]) + band / 2);
    REQUIRE(low[i] <= mid[i] + band);
    if (i > 0) REQUIRE(mid[i] <= mid[i - 1] + band);
  }
  REQUIRE(mid.back() < mid.front() - band);
  REQUIRE(estimate_empirical_los(env, 100.0, r, 500, 4, true) == estimate_empirical_los(env, 100.0, r, 500, 4, false));

  // The same frequency measured directly on sampled worlds.
  const std::vector<double> one{300.0};
  const double est = estimate_empirical_los(env, 100.0, one, 4000, 8, true)[0];
  EnvConfig small = env;
  small.area_side_m = 1000.0;
  Rng rng(12);
  int hits = 0;
  for (int k = 0; k < 4000; ++k) {
    small.rng_seed = 1000 + static_cast<std::uint64_t>(k);
    const Environment world = generate_environment(small);
    const Point3 uav{350.0 + 300.0 * uniform01(rng), 350.0 + 300.0 * uniform01(rng), 100.0};
    const double th = 2.0 * std::numbers::pi * uniform01(rng);
    hits += world.is_los(uav, {uav.x + 300.0 * std::cos(th), uav.y + 300.0 * std::sin(th), env.bs_height_m}) ? 1 : 0;
  }
  REQUIRE(std::abs(est - hits / 4000.0) <= 2.0 * 1.959963984540054 * std::sqrt(0.5 * 0.25 / 4000));
}

TEST_CASE("Laplace transform limits", "[analytic]") {
  FadingConfig cfg;
  REQUIRE(laplace_interference(cfg, 0.0, Channel::Los) == 1.0);
  const double unit = 1.0 / cfg.serving_power_w();
  double prev = 1.0;
  for (double y : {0.01, 0.1, 1.0, 10.0, 100.0}) {
    const double v = laplace_interference(cfg, y * unit, Channel::Los);
    REQUIRE(v > 0.0);
    REQUIRE(v <= prev);
    prev = v;
  }
  FadingConfig empty = cfg;
  empty.env.bs_density_per_km2 = 1e-12;
  REQUIRE(laplace_interference(empty, 100.0 * unit, Channel::Los) == Approx(1.0).margin(1e-9));
  REQUIRE(laplace_interference(empty, 100.0 * unit, Channel::Nlos) == Approx(1.0).margin(1e-9));
}

TEST_CASE("Laplace transform matches Monte Carlo", "[analytic]") {
  for (int m : {1, 2}) {
    FadingConfig cfg;
    cfg.m = m;
    for (Channel j : {Channel::Los, Channel::Nlos}) {
      // Smallest decade of thresholds that puts the transform below 0.9.
      double y = 1.0;
      while (laplace_interference(cfg, w_of(cfg, y), j) > 0.9) y *= 10.0;
      const double w = w_of(cfg, y);
      const double exact = laplace_interference(cfg, w, j);
      const double mc = mc_laplace(cfg, w, j, 200000, 17, true);
      REQUIRE(exact < 0.99);
      REQUIRE(exact > 0.05);
      REQUIRE(mc == Approx(exact).epsilon(0.01));
    }
  }
}

TEST_CASE("log-Laplace derivatives match finite differences", "[analytic]") {
  FadingConfig cfg;
  const double w = w_of(cfg, 1.0);
  const std::vector<double> d = log_laplace_derivatives(cfg, w, Channel::Los, 2);
  const double h = 1e-3 * w;
  auto f = [&](double x) { return std::log(laplace_interference(cfg, x, Channel::Los)); };
  REQUIRE(d[0] == Approx((f(w + h) - f(w - h)) / (2 * h)).epsilon(1e-5));
  REQUIRE(d[1] == Approx((f(w + h) - 2 * f(w) + f(w - h)) / (h * h)).epsilon(1e-3));
}

TEST_CASE("SINR CDF limits and noise-only form", "[analytic]") {
  FadingConfig cfg;
  REQUIRE(sinr_cdf(cfg, 0.0) == 0.0);
  REQUIRE(sinr_cdf(cfg, 1e12) == Approx(1.0).margin(1e-9));
  double prev = 0.0;
  for (double y : db_grid(-20.0, 40.0, 2.0)) {
    const double f = sinr_cdf(cfg, y);
    REQUIRE(f >= prev - 1e-12);
    REQUIRE(f <= 1.0);
    prev = f;
  }

  FadingConfig quiet = cfg;
  quiet.env.bs_density_per_km2 = 1e-12;
  const std::vector<double> ys = db_grid(10.0, 40.0, 5.0);
  const std::vector<double> mc = mc_sinr_cdf(quiet, ys, 20000, 5, true);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double closed = 1.0 - std::exp(-w_of(quiet, ys[i]) * quiet.radio.noise_w);
    REQUIRE(sinr_cdf(quiet, ys[i]) == Approx(closed).margin(1e-9));
    REQUIRE(std::abs(mc[i] - closed) <= 4.0 * std::sqrt(closed * (1 - closed) / 20000) + 1e-9);
  }
}

TEST_CASE("analytic CDF matches simulation", "[analytic]") {
  const std::vector<double> ys = db_grid(-20.0, 40.0, 1.0);
  for (int m : {1, 2, 3}) {
    FadingConfig cfg;
    cfg.m = m;
    std::vector<double> exact;
    for (double y : ys) exact.push_back(sinr_cdf(cfg, y));
    const std::vector<double> mc = mc_sinr_cdf(cfg, ys, 100000, 23 + m, true);
    for (std::size_t i = 1; i < mc.size(); ++i) REQUIRE(mc[i] >= mc[i - 1]);
    REQUIRE(ks_distance(exact, mc) <= 0.015);
  }
}

TEST_CASE("Monte-Carlo CDF is schedule independent", "[analytic]") {
  FadingConfig cfg;
  cfg.m = 2;
  const std::vector<double> ys = db_grid(-10.0, 30.0, 5.0);
  REQUIRE(mc_sinr_cdf(cfg, ys, 30000, 9, true) == mc_sinr_cdf(cfg, ys, 30000, 9, false));
}
