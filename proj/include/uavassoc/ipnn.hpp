#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "uavassoc/env.hpp"
#include "uavassoc/features.hpp"
#include "uavassoc/nn.hpp"
#include "uavassoc/radio.hpp"

namespace uavassoc {

/// One directional-antenna measurement towards a single BS.
struct IpnnSample {
  double r_m = 0.0;
  int los = 0;
  double gamma_m = 0.0;
  double target_rx_dbm = 0.0;
};

struct IpnnDatasetConfig {
  EnvConfig env;
  RadioConfig radio;
  double min_height_m = 20.0;
  double max_height_m = 200.0;
};

/// One fresh environment per trial; the UAV hovers at the centre of the area
/// and points its directional antenna at a uniformly chosen BS.
std::vector<IpnnSample> generate_ipnn_dataset(const IpnnDatasetConfig& cfg, int n_trials, Rng& rng);

/// CSV columns: r_m,los,gamma_m,rx_dbm
void write_ipnn_csv(std::ostream& os, const std::vector<IpnnSample>& samples);
std::vector<IpnnSample> read_ipnn_csv(std::istream& is);

struct IpnnTrainConfig {
  nn::TrainConfig optimiser{1e-3, 64, 0.9, 0.999, 1e-7, 400};
  double holdout_fraction = 0.2;
  int min_samples = 1000;
  std::uint64_t seed = 7;
};

struct IpnnTrainReport {
  double train_mse_db2 = 0.0;
  double holdout_mse_db2 = 0.0;
  double holdout_rmse_db() const;
  std::size_t train_count = 0;
  std::size_t holdout_count = 0;
};

/// Regressor (distance, LoS flag, UAV height) -> received directional power
/// in dBm. Topology 3 -> 20 linear -> 20 tanh -> 1 linear on z-scored inputs.
class IpnnModel {
 public:
  static constexpr int kHidden = 20;
  static std::string expected_topology();

  IpnnModel();
  IpnnModel(nn::DenseNet net, std::array<double, 3> in_mean, std::array<double, 3> in_std, double out_mean,
            double out_std);

  double predict_dbm(double r_m, int los, double gamma_m) const;
  /// Batched prediction over parallel arrays.
  std::vector<double> predict_dbm(const std::vector<double>& r_m, const std::vector<int>& los, double gamma_m) const;

  const nn::DenseNet& net() const { return net_; }
  nn::DenseNet& net() { return net_; }
  const std::array<double, 3>& input_mean() const { return in_mean_; }
  const std::array<double, 3>& input_std() const { return in_std_; }
  double output_mean() const { return out_mean_; }
  double output_std() const { return out_std_; }

  nn::Matrix encode_inputs(const std::vector<IpnnSample>& samples) const;

  void save(const std::string& path) const;
  static IpnnModel load(const std::string& path);

 private:
  nn::DenseNet net_;
  std::array<double, 3> in_mean_{};
  std::array<double, 3> in_std_{1.0, 1.0, 1.0};
  double out_mean_ = 0.0;
  double out_std_ = 1.0;
};

/// Fits the model on a shuffled training split; normalisation constants come
/// from that split only. Throws Error(InvalidConfig) below `min_samples` and
/// Error(Divergence) on a non-finite loss.
IpnnModel train_ipnn(const std::vector<IpnnSample>& samples, const IpnnTrainConfig& cfg,
                     IpnnTrainReport* report = nullptr);

double ipnn_mse_db2(const IpnnModel& model, const std::vector<IpnnSample>& samples);

/// Predicted aggregate in-lobe interference per candidate row, in watts.
/// Masked entries contribute nothing.
std::vector<double> estimate_interference(const IpnnModel& model, const StateFeatures& state);

}  // namespace uavassoc
