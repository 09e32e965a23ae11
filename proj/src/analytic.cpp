#include "uavassoc/analytic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <queue>
#include <random>

namespace uavassoc {

// ---------------------------------------------------------------------------
// Quadrature

namespace {

// Kronrod 15-point abscissae; odd indices are the 7-point Gauss nodes.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926,
    0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518,
    0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                       0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Piece {
  double a, b, value, error;
  bool operator<(const Piece& o) const { return error < o.error; }
};

Piece gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double k = fc * kWgk[7];
  double g = fc * kWg[3];
  double abs_k = std::abs(k);
  std::array<double, 7> f1{}, f2{};
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    f1[j] = f(c - dx);
    f2[j] = f(c + dx);
    k += kWgk[j] * (f1[j] + f2[j]);
    abs_k += kWgk[j] * (std::abs(f1[j]) + std::abs(f2[j]));
    if (j % 2 == 1) g += kWg[j / 2] * (f1[j] + f2[j]);
  }
  const double mean = 0.5 * k;
  double asc = kWgk[7] * std::abs(fc - mean);
  for (int j = 0; j < 7; ++j) asc += kWgk[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));
  asc *= std::abs(h);
  double err = std::abs((k - g) * h);
  if (asc != 0.0 && err != 0.0) err = asc * std::min(1.0, std::pow(200.0 * err / asc, 1.5));
  // Roundoff floor.
  const double floor = 50.0 * std::numeric_limits<double>::epsilon() * abs_k * std::abs(h);
  if (floor > std::numeric_limits<double>::min()) err = std::max(err, floor);
  return {a, b, k * h, err};
}

QuadResult integrate_pieces(const std::function<double(double)>& f, const std::vector<double>& nodes, double rel_tol,
                            double abs_tol, int max_intervals) {
  QuadResult out;
  std::priority_queue<Piece> heap;
  double total = 0.0, error = 0.0;
  long evals = 0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    if (!(nodes[i + 1] > nodes[i])) continue;
    Piece p = gk15(f, nodes[i], nodes[i + 1]);
    evals += 15;
    total += p.value;
    error += p.error;
    heap.push(p);
  }
  const auto limit = static_cast<std::size_t>(std::max<std::size_t>(max_intervals, 4 * heap.size()));
  while (!heap.empty() && error > std::max(abs_tol, rel_tol * std::abs(total))) {
    if (heap.size() >= limit) {
      throw Error(ErrorKind::IntegrationFailure, "adaptive quadrature did not converge (error " +
                                                     std::to_string(error) + ", value " + std::to_string(total) + ")");
    }
    const Piece worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      throw Error(ErrorKind::IntegrationFailure, "adaptive quadrature reached machine resolution");
    }
    const Piece l = gk15(f, worst.a, mid);
    const Piece r = gk15(f, mid, worst.b);
    evals += 30;
    total += l.value + r.value - worst.value;
    error += l.error + r.error - worst.error;
    heap.push(l);
    heap.push(r);
  }
  // Re-sum to shed accumulated cancellation in the running totals.
  total = 0.0;
  error = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  if (!std::isfinite(total)) throw Error(ErrorKind::IntegrationFailure, "integrand is not finite");
  out.value = total;
  out.abs_error = error;
  out.evaluations = evals;
  return out;
}

}  // namespace

QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b, double rel_tol,
                              double abs_tol, int max_intervals) {
  if (a == b) return {};
  if (b < a) {
    QuadResult r = integrate_adaptive(f, b, a, rel_tol, abs_tol, max_intervals);
    r.value = -r.value;
    return r;
  }
  return integrate_pieces(f, {a, b}, rel_tol, abs_tol, max_intervals);
}

QuadResult integrate_polar(const std::function<double(double, double)>& f, double r0, double r1, double t0,
                           double t1, const std::vector<double>& r_breaks, double rel_tol, double abs_tol) {
  std::vector<double> nodes{r0};
  for (double b : r_breaks) {
    if (b > r0 && b < r1) nodes.push_back(b);
  }
  nodes.push_back(r1);
  std::sort(nodes.begin(), nodes.end());
  long inner_evals = 0;
  auto radial = [&](double r) {
    const QuadResult inner = integrate_adaptive([&](double t) { return f(r, t); }, t0, t1, rel_tol, 0.0);
    inner_evals += inner.evaluations;
    return inner.value * r;
  };
  QuadResult out = integrate_pieces(radial, nodes, rel_tol, abs_tol, 4000);
  out.evaluations = inner_evals;
  return out;
}

// ---------------------------------------------------------------------------
// LoS probability

LosProbability LosProbability::itu(double uav_height_m, double bs_height_m, double building_density_per_km2,
                                   double building_coverage, double building_height_scale_m) {
  if (!(building_density_per_km2 > 0.0 && building_coverage > 0.0 && building_height_scale_m > 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "LoS model needs positive building parameters");
  }
  LosProbability p;
  p.variant_ = Variant::Itu;
  p.uav_h_ = uav_height_m;
  p.bs_h_ = bs_height_m;
  p.crossings_per_m_ = std::sqrt(building_density_per_km2 * building_coverage) * 1e-3;
  p.kappa_ = building_height_scale_m;
  return p;
}

LosProbability LosProbability::itu(const EnvConfig& env, double uav_height_m) {
  return itu(uav_height_m, env.bs_height_m, env.building_density_per_km2, env.building_coverage,
             env.building_height_scale_m);
}

LosProbability LosProbability::tabulated(std::vector<double> r_grid, std::vector<double> p) {
  if (r_grid.empty() || r_grid.size() != p.size()) throw Error(ErrorKind::DimensionMismatch, "bad LoS table");
  for (std::size_t i = 1; i < r_grid.size(); ++i) {
    if (!(r_grid[i] > r_grid[i - 1])) throw Error(ErrorKind::InvalidConfig, "LoS table radii must increase");
  }
  LosProbability out;
  out.variant_ = Variant::Empirical;
  out.r_grid_ = std::move(r_grid);
  out.p_ = std::move(p);
  return out;
}

double LosProbability::operator()(double r_m) const {
  if (variant_ == Variant::Itu) {
    const auto b = static_cast<long>(std::floor(r_m * crossings_per_m_));
    double prob = 1.0;
    const double drop = uav_h_ - bs_h_;
    for (long n = 0; n < b; ++n) {
      const double h = uav_h_ - (static_cast<double>(n) + 0.5) * drop / static_cast<double>(b);
      prob *= 1.0 - std::exp(-h * h / (2.0 * kappa_ * kappa_));
      if (prob == 0.0) break;
    }
    return prob;
  }
  if (r_m <= r_grid_.front()) return p_.front();
  if (r_m >= r_grid_.back()) return p_.back();
  const auto it = std::upper_bound(r_grid_.begin(), r_grid_.end(), r_m);
  const std::size_t i = static_cast<std::size_t>(it - r_grid_.begin());
  const double t = (r_m - r_grid_[i - 1]) / (r_grid_[i] - r_grid_[i - 1]);
  return p_[i - 1] + t * (p_[i] - p_[i - 1]);
}

std::vector<double> LosProbability::breakpoints(double r_max_m) const {
  std::vector<double> out;
  if (variant_ == Variant::Itu) {
    for (long n = 1;; ++n) {
      const double r = static_cast<double>(n) / crossings_per_m_;
      if (r >= r_max_m) break;
      out.push_back(r);
    }
  } else {
    for (double r : r_grid_) {
      if (r > 0.0 && r < r_max_m) out.push_back(r);
    }
  }
  return out;
}

std::vector<double> estimate_empirical_los(const EnvConfig& env, double uav_height_m, const std::vector<double>& r_grid,
                                           int samples_per_r, std::uint64_t seed, bool parallel) {
  env.validate();
  if (samples_per_r < 1) throw Error(ErrorKind::InvalidConfig, "samples_per_r must be positive");
  const long per = samples_per_r;
  const long total = per * static_cast<long>(r_grid.size());
  std::vector<unsigned char> hit(static_cast<std::size_t>(total), 0);
  // A local patch of buildings large enough for the longest link, with the
  // UAV at a random offset inside the central cell.
  const double pitch = env.building_pitch_m();
  const double reach = r_grid.empty() ? 0.0 : *std::max_element(r_grid.begin(), r_grid.end());
  const int half_cells = static_cast<int>(std::ceil(reach / pitch)) + 2;
  BuildingGrid patch;
  patch.pitch_m = pitch;
  patch.footprint_m = env.building_footprint_m();
  patch.cells_per_side = 2 * half_cells + 1;
  EnvConfig local = env;
  local.area_side_m = patch.cells_per_side * pitch;

#pragma omp parallel for schedule(static) if (parallel)
  for (long k = 0; k < total; ++k) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(k));
    BuildingGrid grid = patch;
    grid.heights_m.resize(static_cast<std::size_t>(grid.cells_per_side) * grid.cells_per_side);
    for (double& h : grid.heights_m) {
      h = env.building_height_scale_m * std::sqrt(-2.0 * std::log1p(-uniform01(rng)));
      grid.max_height_m = std::max(grid.max_height_m, h);
    }
    const Environment world(local, {}, std::move(grid));
    const double theta = 2.0 * std::numbers::pi * uniform01(rng);
    const double r = r_grid[static_cast<std::size_t>(k / per)];
    const Point3 uav{(half_cells + uniform01(rng)) * pitch, (half_cells + uniform01(rng)) * pitch, uav_height_m};
    const Point3 bs{uav.x + r * std::cos(theta), uav.y + r * std::sin(theta), env.bs_height_m};
    hit[static_cast<std::size_t>(k)] = world.is_los(uav, bs) ? 1 : 0;
  }

  std::vector<double> out(r_grid.size(), 0.0);
  for (long k = 0; k < total; ++k) out[static_cast<std::size_t>(k / per)] += hit[static_cast<std::size_t>(k)];
  for (double& v : out) v /= static_cast<double>(per);
  return out;
}

// ---------------------------------------------------------------------------
// Fading model

void FadingConfig::validate() const {
  if (m < 1) throw Error(ErrorKind::InvalidConfig, "Nakagami m must be a positive integer");
  if (!(r_s_m >= 0.0)) throw Error(ErrorKind::InvalidConfig, "serving distance must be non-negative");
  if (!(uav_height_m > 0.0) || uav_height_m == env.bs_height_m) {
    throw Error(ErrorKind::InvalidConfig, "UAV height must be positive and differ from the BS height");
  }
  if (!(rel_tol > 0.0)) throw Error(ErrorKind::InvalidConfig, "rel_tol must be positive");
  radio.validate();
  if (!(env.bs_density_per_km2 >= 0.0) || !(env.area_side_m > 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "bad BS density or area");
  }
}

double FadingConfig::r_max_m() const { return std::sqrt(2.0) * env.area_side_m; }

RingSector FadingConfig::sector() const {
  RingSector s = ring_sector(uav_height_m, env.bs_height_m, r_s_m, radio.beamwidth_rad);
  s.r_max_m = std::min(s.r_max_m, r_max_m());
  return s;
}

double FadingConfig::serving_power_w() const {
  LinkBudget l;
  l.r_m = r_s_m;
  l.delta_h_m = uav_height_m - env.bs_height_m;
  l.phi_rad = std::atan2(l.delta_h_m, l.r_m);
  l.los = serving;
  return uav_antenna_gain(radio.beamwidth_rad) * rx_power(radio, l);
}

namespace {

// Mean power through the directional antenna from a BS at horizontal r.
double interferer_power(const FadingConfig& cfg, double r, Channel j) {
  LinkBudget l;
  l.r_m = r;
  l.delta_h_m = cfg.uav_height_m - cfg.env.bs_height_m;
  l.phi_rad = std::atan2(l.delta_h_m, r);
  l.los = j;
  return uav_antenna_gain(cfg.radio.beamwidth_rad) * rx_power(cfg.radio, l);
}

double channel_density_per_m2(const FadingConfig& cfg, double r, Channel j) {
  const double lambda = cfg.env.bs_density_per_km2 * 1e-6;
  const double p = cfg.los(r);
  return lambda * (j == Channel::Los ? p : 1.0 - p);
}

// Rising factorial (m)_k.
double rising(int m, int k) {
  double v = 1.0;
  for (int i = 0; i < k; ++i) v *= static_cast<double>(m + i);
  return v;
}

// Exponent mass the truncation at r_max can hide, using
// 1 - (1 + wq/m)^-m <= wq, mu <= N_t and d >= r.
double truncation_bound(const FadingConfig& cfg, double w, Channel j) {
  const RingSector full = ring_sector(cfg.uav_height_m, cfg.env.bs_height_m, cfg.r_s_m, cfg.radio.beamwidth_rad);
  const double R = cfg.r_max_m();
  if (!(full.r_max_m > R) || w == 0.0) return 0.0;
  const double alpha = cfg.radio.alpha(j);
  if (!(alpha > 2.0)) return std::numeric_limits<double>::infinity();
  const double lambda = cfg.env.bs_density_per_km2 * 1e-6;
  const double share = j == Channel::Los ? cfg.los(R) : 1.0;
  const double peak = uav_antenna_gain(cfg.radio.beamwidth_rad) * cfg.radio.tx_power_w * cfg.radio.ula_elements *
                      cfg.radio.nearfield_linear();
  auto tail = [&](double r) { return std::pow(r, 2.0 - alpha) / (alpha - 2.0); };
  const double upper = std::isfinite(full.r_max_m) ? tail(R) - tail(full.r_max_m) : tail(R);
  return lambda * share * cfg.radio.beamwidth_rad * w * peak * upper;
}

// Integral over the sector of lambda_j(x) * g(q(x)).
QuadResult sector_integral(const FadingConfig& cfg, Channel j, const std::function<double(double)>& g_of_q) {
  const RingSector s = cfg.sector();
  if (!(s.r_max_m > s.r_min_m) || cfg.env.bs_density_per_km2 == 0.0) return {};
  const double half = 0.5 * s.arc_rad;
  auto integrand = [&](double r, double /*theta*/) {
    const double lam = channel_density_per_m2(cfg, r, j);
    if (lam == 0.0) return 0.0;
    return lam * g_of_q(interferer_power(cfg, r, j));
  };
  return integrate_polar(integrand, s.r_min_m, s.r_max_m, -half, half, cfg.los.breakpoints(s.r_max_m), cfg.rel_tol,
                         1e-300);
}

}  // namespace

double laplace_interference(const FadingConfig& cfg, double w, Channel j, LaplaceInfo* info) {
  cfg.validate();
  if (!(w >= 0.0)) throw Error(ErrorKind::InvalidConfig, "Laplace argument must be non-negative");
  const double m = cfg.m;
  const QuadResult q = sector_integral(cfg, j, [&](double qv) {
    // 1 - (1 + w q / m)^-m, written to keep precision for small w q.
    return -std::expm1(-m * std::log1p(w * qv / m));
  });
  if (info) {
    info->abs_error = q.abs_error;
    info->evaluations = q.evaluations;
    info->tail_bound = truncation_bound(cfg, w, j);
  }
  return std::exp(-q.value);
}

std::vector<double> log_laplace_derivatives(const FadingConfig& cfg, double w, Channel j, int order) {
  cfg.validate();
  std::vector<double> out;
  for (int k = 1; k <= order; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    const double coeff = rising(cfg.m, k);
    const double m = cfg.m;
    // d^k/dw^k of -[1 - (1 + w q/m)^-m] = (-1)^k (m)_k (q/m)^k (1 + w q/m)^(-m-k)
    const QuadResult q = sector_integral(cfg, j, [&](double qv) {
      const double x = qv / m;
      return coeff * std::pow(x, k) * std::pow(1.0 + w * x, -m - k);
    });
    out.push_back(sign * q.value);
  }
  return out;
}

double sinr_cdf(const FadingConfig& cfg, double y) {
  cfg.validate();
  if (!(y >= 0.0)) throw Error(ErrorKind::InvalidConfig, "SINR threshold must be non-negative");
  if (y == 0.0) return 0.0;
  if (std::isinf(y)) return 1.0;
  const int m = cfg.m;
  // SINR <= y  <=>  H <= y (I + noise) / S with H ~ Gamma(m, 1/m).
  const double s = m * y / cfg.serving_power_w();
  const double L = laplace_interference(cfg, s, Channel::Los) * laplace_interference(cfg, s, Channel::Nlos) *
                   std::exp(-s * cfg.radio.noise_w);
  if (m == 1) return std::clamp(1.0 - L, 0.0, 1.0);

  // Derivatives of log L_X with L_X = L_L L_N exp(-s noise).
  std::vector<double> G(static_cast<std::size_t>(m), 0.0);  // G[k] = d^k log L_X, k >= 1
  const auto dl = log_laplace_derivatives(cfg, s, Channel::Los, m - 1);
  const auto dn = log_laplace_derivatives(cfg, s, Channel::Nlos, m - 1);
  for (int k = 1; k < m; ++k) G[k] = dl[k - 1] + dn[k - 1];
  G[1] -= cfg.radio.noise_w;

  // L^(k+1) = sum_j C(k, j) G^(j+1) L^(k-j)
  std::vector<double> Ld(static_cast<std::size_t>(m), 0.0);
  Ld[0] = L;
  for (int k = 0; k + 1 < m; ++k) {
    double acc = 0.0;
    double binom = 1.0;
    for (int jj = 0; jj <= k; ++jj) {
      acc += binom * G[jj + 1] * Ld[k - jj];
      binom = binom * (k - jj) / (jj + 1);
    }
    Ld[k + 1] = acc;
  }
  double sum = 0.0;
  double term_scale = 1.0;  // (-s)^k / k!
  for (int k = 0; k < m; ++k) {
    sum += term_scale * Ld[k];
    term_scale *= -s / (k + 1);
  }
  return std::clamp(1.0 - sum, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Monte Carlo

namespace {

constexpr long kShards = 256;

// Unit-mean Gamma(m) as a sum of m exponentials.
double unit_gamma(int m, Rng& rng) {
  double s = 0.0;
  for (int i = 0; i < m; ++i) s -= std::log1p(-uniform01(rng));
  return s / m;
}

// Aggregate faded interference of one realisation; `only` restricts to one
// channel state.
double sample_interference(const FadingConfig& cfg, const RingSector& sec, Rng& rng, const Channel* only) {
  const double lambda = cfg.env.bs_density_per_km2 * 1e-6;
  const double r0 = sec.r_min_m, r1 = sec.r_max_m;
  const double mean_count = lambda * 0.5 * sec.arc_rad * (r1 * r1 - r0 * r0);
  if (!(mean_count > 0.0)) return 0.0;
  std::poisson_distribution<long> count(mean_count);
  const long n = count(rng);
  double total = 0.0;
  for (long i = 0; i < n; ++i) {
    const double r = std::sqrt(r0 * r0 + uniform01(rng) * (r1 * r1 - r0 * r0));
    const Channel j = uniform01(rng) < cfg.los(r) ? Channel::Los : Channel::Nlos;
    const double h = unit_gamma(cfg.m, rng);
    if (only && *only != j) continue;
    total += h * interferer_power(cfg, r, j);
  }
  return total;
}

template <class Body>
void for_shards(long n_samples, std::uint64_t seed, bool parallel, Body body) {
  std::exception_ptr failure;
  std::mutex mu;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (long shard = 0; shard < kShards; ++shard) {
    try {
      const long begin = n_samples * shard / kShards;
      const long end = n_samples * (shard + 1) / kShards;
      Rng rng = make_rng(seed, static_cast<std::uint64_t>(shard));
      body(shard, end - begin, rng);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<double> mc_sinr_cdf(const FadingConfig& cfg, const std::vector<double>& y_grid, long n_samples,
                                std::uint64_t seed, bool parallel) {
  cfg.validate();
  if (n_samples < 1) throw Error(ErrorKind::InvalidConfig, "n_samples must be positive");
  if (!std::is_sorted(y_grid.begin(), y_grid.end())) throw Error(ErrorKind::InvalidConfig, "y grid must be sorted");
  const RingSector sec = cfg.sector();
  const double S = cfg.serving_power_w();
  const std::size_t ny = y_grid.size();
  // hist[shard][i]: samples whose SINR first fits under y_grid[i].
  std::vector<long> hist(static_cast<std::size_t>(kShards) * (ny + 1), 0);
  for_shards(n_samples, seed, parallel, [&](long shard, long count, Rng& rng) {
    long* h = hist.data() + static_cast<std::size_t>(shard) * (ny + 1);
    for (long i = 0; i < count; ++i) {
      const double hs = unit_gamma(cfg.m, rng);
      const double interference = sample_interference(cfg, sec, rng, nullptr);
      const double sinr = hs * S / (interference + cfg.radio.noise_w);
      const auto idx = static_cast<std::size_t>(std::lower_bound(y_grid.begin(), y_grid.end(), sinr) - y_grid.begin());
      ++h[idx];
    }
  });
  std::vector<double> cdf(ny, 0.0);
  long running = 0;
  for (std::size_t i = 0; i < ny; ++i) {
    for (long shard = 0; shard < kShards; ++shard) running += hist[static_cast<std::size_t>(shard) * (ny + 1) + i];
    cdf[i] = static_cast<double>(running) / static_cast<double>(n_samples);
  }
  return cdf;
}

double mc_laplace(const FadingConfig& cfg, double w, Channel j, long n_samples, std::uint64_t seed, bool parallel) {
  cfg.validate();
  if (n_samples < 1) throw Error(ErrorKind::InvalidConfig, "n_samples must be positive");
  const RingSector sec = cfg.sector();
  std::vector<double> sums(kShards, 0.0);
  for_shards(n_samples, seed, parallel, [&](long shard, long count, Rng& rng) {
    double acc = 0.0;
    for (long i = 0; i < count; ++i) acc += std::exp(-w * sample_interference(cfg, sec, rng, &j));
    sums[static_cast<std::size_t>(shard)] = acc;
  });
  double total = 0.0;
  for (double s : sums) total += s;
  return total / static_cast<double>(n_samples);
}

double ks_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::DimensionMismatch, "CDFs differ in length");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace uavassoc
