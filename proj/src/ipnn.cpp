#include "uavassoc/ipnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace uavassoc {

namespace {

constexpr double kPowerFloorW = 1e-30;

}  // namespace

std::vector<IpnnSample> generate_ipnn_dataset(const IpnnDatasetConfig& cfg, int n_trials, Rng& rng) {
  if (n_trials < 1) throw Error(ErrorKind::InvalidConfig, "n_trials must be >= 1");
  cfg.env.validate();
  cfg.radio.validate();
  const double eta = uav_antenna_gain(cfg.radio.beamwidth_rad);
  std::vector<IpnnSample> out;
  out.reserve(static_cast<std::size_t>(n_trials));
  while (static_cast<int>(out.size()) < n_trials) {
    EnvConfig ec = cfg.env;
    ec.rng_seed = rng();
    const Environment env = generate_environment(ec);
    if (env.bs_count() == 0) continue;
    const Vec2 centre{0.5 * env.side(), 0.5 * env.side()};
    const double gamma = cfg.min_height_m + (cfg.max_height_m - cfg.min_height_m) * uniform01(rng);
    const auto j = std::min(env.bs_count() - 1, static_cast<std::size_t>(uniform01(rng) * env.bs_count()));
    const bool los = env.is_los({centre.x, centre.y, gamma}, env.bs_point(j));
    const LinkBudget link =
        make_link(cfg.radio, centre, gamma, env.bs(j), ec.bs_height_m, los ? Channel::Los : Channel::Nlos);
    IpnnSample s;
    s.r_m = link.r_m;
    s.los = los ? 1 : 0;
    s.gamma_m = gamma;
    s.target_rx_dbm = watts_to_dbm(std::max(eta * link.rx_power_w, kPowerFloorW));
    out.push_back(s);
  }
  return out;
}

void write_ipnn_csv(std::ostream& os, const std::vector<IpnnSample>& samples) {
  std::ostringstream out;
  out.precision(17);
  out << "r_m,los,gamma_m,rx_dbm\n";
  for (const IpnnSample& s : samples) {
    out << s.r_m << ',' << s.los << ',' << s.gamma_m << ',' << s.target_rx_dbm << '\n';
  }
  os << out.str();
}

std::vector<IpnnSample> read_ipnn_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("r_m,los,gamma_m,rx_dbm", 0) != 0) {
    throw Error(ErrorKind::CorruptFile, "dataset CSV: bad header");
  }
  std::vector<IpnnSample> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    IpnnSample s;
    if (!(ls >> s.r_m >> s.los >> s.gamma_m >> s.target_rx_dbm) || s.r_m < 0.0 ||
        !std::isfinite(s.target_rx_dbm)) {
      throw Error(ErrorKind::CorruptFile, "dataset CSV: bad row " + std::to_string(lineno));
    }
    out.push_back(s);
  }
  return out;
}

double IpnnTrainReport::holdout_rmse_db() const { return std::sqrt(holdout_mse_db2); }

std::string IpnnModel::expected_topology() { return "3-20:linear-20:tanh-1:linear"; }

IpnnModel::IpnnModel() {
  Rng rng(0);
  const nn::LayerSpec specs[] = {
      {kHidden, nn::Activation::Linear}, {kHidden, nn::Activation::Tanh}, {1, nn::Activation::Linear}};
  net_ = nn::DenseNet::random(3, specs, rng);
}

IpnnModel::IpnnModel(nn::DenseNet net, std::array<double, 3> in_mean, std::array<double, 3> in_std,
                     double out_mean, double out_std)
    : net_(std::move(net)), in_mean_(in_mean), in_std_(in_std), out_mean_(out_mean), out_std_(out_std) {
  if (net_.topology() != expected_topology()) {
    throw Error(ErrorKind::TopologyMismatch, "IPNN topology " + net_.topology());
  }
}

nn::Matrix IpnnModel::encode_inputs(const std::vector<IpnnSample>& samples) const {
  nn::Matrix x(3, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    x(0, c) = (samples[i].r_m - in_mean_[0]) / in_std_[0];
    x(1, c) = (samples[i].los - in_mean_[1]) / in_std_[1];
    x(2, c) = (samples[i].gamma_m - in_mean_[2]) / in_std_[2];
  }
  return x;
}

double IpnnModel::predict_dbm(double r_m, int los, double gamma_m) const {
  nn::Vector x(3);
  x << (r_m - in_mean_[0]) / in_std_[0], (los - in_mean_[1]) / in_std_[1], (gamma_m - in_mean_[2]) / in_std_[2];
  return net_.forward(x)(0) * out_std_ + out_mean_;
}

std::vector<double> IpnnModel::predict_dbm(const std::vector<double>& r_m, const std::vector<int>& los,
                                           double gamma_m) const {
  const auto n = static_cast<Eigen::Index>(r_m.size());
  nn::Matrix x(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(0, i) = (r_m[static_cast<std::size_t>(i)] - in_mean_[0]) / in_std_[0];
    x(1, i) = (los[static_cast<std::size_t>(i)] - in_mean_[1]) / in_std_[1];
    x(2, i) = (gamma_m - in_mean_[2]) / in_std_[2];
  }
  const nn::Matrix y = net_.forward_batch(x);
  std::vector<double> out(r_m.size());
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = y(0, i) * out_std_ + out_mean_;
  return out;
}

void IpnnModel::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path);
  std::ostringstream out;
  out.precision(17);
  out << "uavassoc-ipnn 1\n";
  out << "input_mean " << in_mean_[0] << ' ' << in_mean_[1] << ' ' << in_mean_[2] << '\n';
  out << "input_std " << in_std_[0] << ' ' << in_std_[1] << ' ' << in_std_[2] << '\n';
  out << "output " << out_mean_ << ' ' << out_std_ << '\n';
  os << out.str();
  nn::write_densenet(os, net_);
}

IpnnModel IpnnModel::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot read " + path);
  std::string word;
  int version = 0;
  std::array<double, 3> mean{}, sd{};
  double om = 0.0, os = 1.0;
  if (!(is >> word >> version) || word != "uavassoc-ipnn" || version != 1 ||
      !(is >> word >> mean[0] >> mean[1] >> mean[2]) || word != "input_mean" ||
      !(is >> word >> sd[0] >> sd[1] >> sd[2]) || word != "input_std" || !(is >> word >> om >> os) ||
      word != "output") {
    throw Error(ErrorKind::CorruptFile, "IPNN model file: bad header");
  }
  nn::DenseNet net = nn::read_densenet(is, expected_topology());
  return IpnnModel(std::move(net), mean, sd, om, os);
}

double ipnn_mse_db2(const IpnnModel& model, const std::vector<IpnnSample>& samples) {
  if (samples.empty()) return 0.0;
  const nn::Matrix y = model.net().forward_batch(model.encode_inputs(samples));
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double pred = y(0, static_cast<Eigen::Index>(i)) * model.output_std() + model.output_mean();
    const double e = pred - samples[i].target_rx_dbm;
    sum += e * e;
  }
  return sum / static_cast<double>(samples.size());
}

IpnnModel train_ipnn(const std::vector<IpnnSample>& samples, const IpnnTrainConfig& cfg, IpnnTrainReport* report) {
  if (static_cast<int>(samples.size()) < cfg.min_samples) {
    throw Error(ErrorKind::InvalidConfig, "IPNN training needs at least " + std::to_string(cfg.min_samples) +
                                              " samples, got " + std::to_string(samples.size()));
  }
  Rng rng = make_rng(cfg.seed, 0);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i))]);
  }
  const auto n_hold = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * samples.size()));
  std::vector<IpnnSample> train, hold;
  train.reserve(samples.size() - n_hold);
  hold.reserve(n_hold);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_hold ? hold : train).push_back(samples[order[i]]);
  }

  // Normalisation from the training split.
  std::array<double, 3> mean{}, sd{};
  double out_mean = 0.0, out_sd = 0.0;
  const auto n = static_cast<double>(train.size());
  for (const IpnnSample& s : train) {
    mean[0] += s.r_m / n;
    mean[1] += s.los / n;
    mean[2] += s.gamma_m / n;
    out_mean += s.target_rx_dbm / n;
  }
  for (const IpnnSample& s : train) {
    sd[0] += (s.r_m - mean[0]) * (s.r_m - mean[0]) / n;
    sd[1] += (s.los - mean[1]) * (s.los - mean[1]) / n;
    sd[2] += (s.gamma_m - mean[2]) * (s.gamma_m - mean[2]) / n;
    out_sd += (s.target_rx_dbm - out_mean) * (s.target_rx_dbm - out_mean) / n;
  }
  for (double& v : sd) v = v > 1e-24 ? std::sqrt(v) : 1.0;
  out_sd = out_sd > 1e-24 ? std::sqrt(out_sd) : 1.0;

  Rng init_rng = make_rng(cfg.seed, 1);
  const nn::LayerSpec specs[] = {{IpnnModel::kHidden, nn::Activation::Linear},
                                 {IpnnModel::kHidden, nn::Activation::Tanh},
                                 {1, nn::Activation::Linear}};
  IpnnModel model(nn::DenseNet::random(3, specs, init_rng), mean, sd, out_mean, out_sd);

  const nn::Matrix x_all = model.encode_inputs(train);
  nn::Matrix y_all(1, x_all.cols());
  for (std::size_t i = 0; i < train.size(); ++i) {
    y_all(0, static_cast<Eigen::Index>(i)) = (train[i].target_rx_dbm - out_mean) / out_sd;
  }

  nn::Adam adam(model.net());
  const auto batch = static_cast<std::size_t>(std::max(1, cfg.optimiser.batch_size));
  std::vector<std::size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  nn::Batch b;
  for (int epoch = 0; epoch < cfg.optimiser.epochs; ++epoch) {
    for (std::size_t i = idx.size(); i > 1; --i) {
      std::swap(idx[i - 1], idx[static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i))]);
    }
    for (std::size_t start = 0; start < idx.size(); start += batch) {
      const std::size_t len = std::min(batch, idx.size() - start);
      b.inputs.resize(3, static_cast<Eigen::Index>(len));
      b.targets.resize(1, static_cast<Eigen::Index>(len));
      for (std::size_t k = 0; k < len; ++k) {
        const auto c = static_cast<Eigen::Index>(k);
        const auto src = static_cast<Eigen::Index>(idx[start + k]);
        b.inputs.col(c) = x_all.col(src);
        b.targets(0, c) = y_all(0, src);
      }
      nn::backprop_step(model.net(), adam, b, cfg.optimiser);
    }
  }
  if (!model.net().all_finite()) throw Error(ErrorKind::Divergence, "IPNN weights are not finite");

  if (report) {
    report->train_mse_db2 = ipnn_mse_db2(model, train);
    report->holdout_mse_db2 = ipnn_mse_db2(model, hold);
    report->train_count = train.size();
    report->holdout_count = hold.size();
  }
  return model;
}

std::vector<double> estimate_interference(const IpnnModel& model, const StateFeatures& state) {
  std::vector<double> out(state.rows(), 0.0);
  std::vector<double> r;
  std::vector<int> los;
  std::vector<std::size_t> row_of;
  for (std::size_t i = 0; i < state.rows(); ++i) {
    for (int j = 0; j < state.xi; ++j) {
      const std::size_t k = state.at(i, static_cast<std::size_t>(j));
      if (!state.mask[k]) continue;
      r.push_back(state.f_zeta[k]);
      los.push_back(state.l_zeta[k]);
      row_of.push_back(i);
    }
  }
  if (r.empty()) return out;
  const std::vector<double> dbm = model.predict_dbm(r, los, state.gamma_m);
  for (std::size_t k = 0; k < dbm.size(); ++k) out[row_of[k]] += dbm_to_watts(dbm[k]);
  return out;
}

}  // namespace uavassoc
