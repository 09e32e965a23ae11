#include "uavassoc/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "uavassoc/analytic.hpp"
#include "uavassoc/harness.hpp"

namespace uavassoc {

namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::uint64_t seed = 1;
  std::string out = ".";
  int threads = 0;  // 0: OpenMP default
  std::vector<std::string> sets;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Flat key = value config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Master seed");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--threads", c.threads, "Worker threads (1 = single-threaded)")->check(CLI::NonNegativeNumber);
  app->add_option("--set", c.sets, "Override one config key: --set radio.tx_power_w=40");
}

ScenarioConfig load_scenario(const Common& c) {
  ScenarioConfig cfg = c.config.empty() ? ScenarioConfig{} : load_config_file(c.config);
  for (const std::string& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Usage, "--set expects key=value, got '" + kv + "'");
    apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.agent.zeta = cfg.zeta;
  cfg.validate();
  return cfg;
}

fs::path prepare_out(const Common& c) {
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + c.out + ": " + ec.message());
  return fs::path(c.out);
}

void apply_threads(const Common& c) {
#ifdef _OPENMP
  if (c.threads > 0) omp_set_num_threads(c.threads);
#else
  (void)c;
#endif
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + p.string());
  return os;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"UAV base-station association simulator"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  Common common;
  auto log = [&err](const std::string& msg) { err << msg << std::endl; };

  // gen-env
  auto* gen_env = app.add_subcommand("gen-env", "Sample one environment and a trajectory");
  add_common(gen_env, common);

  // gen-ipnn-data
  int data_trials = 20000;
  auto* gen_data = app.add_subcommand("gen-ipnn-data", "Generate the interference-regression dataset");
  add_common(gen_data, common);
  gen_data->add_option("--trials", data_trials, "Samples (one fresh environment each)")->check(CLI::PositiveNumber);

  // train-ipnn
  std::string data_path;
  auto* train_ipnn_cmd = app.add_subcommand("train-ipnn", "Fit the interference regressor");
  add_common(train_ipnn_cmd, common);
  train_ipnn_cmd->add_option("--data", data_path, "Dataset CSV (generated when omitted)")->check(CLI::ExistingFile);

  // train-agent
  int agent_trials = 300;
  std::string ipnn_path;
  auto* train_agent = app.add_subcommand("train-agent", "Train the association agent online");
  add_common(train_agent, common);
  train_agent->add_option("--trials", agent_trials, "Training episodes")->check(CLI::PositiveNumber);
  train_agent->add_option("--ipnn", ipnn_path, "Trained IPNN model file")->check(CLI::ExistingFile);

  // eval
  int eval_trials = 200;
  std::string agent_dir, eval_policies = "closest,sinr,meandist,angle,ipnn";
  auto* eval = app.add_subcommand("eval", "Evaluate frozen policies on fresh trials");
  add_common(eval, common);
  eval->add_option("--trials", eval_trials, "Evaluation episodes")->check(CLI::PositiveNumber);
  eval->add_option("--policy", eval_policies, "Comma-separated policy list");
  eval->add_option("--ipnn", ipnn_path, "Trained IPNN model file")->check(CLI::ExistingFile);
  eval->add_option("--agent", agent_dir, "Agent checkpoint directory (needed for reqiba)")->check(CLI::ExistingDirectory);

  // sweep
  std::string param = "uav_height", grid = "100", sweep_policies = "closest,sinr,ipnn,reqiba";
  int sweep_trials = 2000, warmup = -1;
  bool fast = false;
  auto* sweep = app.add_subcommand("sweep", "Monte-Carlo parameter sweep");
  add_common(sweep, common);
  sweep->add_option("--param", param, "uav_height, bs_density, building_density, beamwidth, handover_penalty, turn_prob");
  sweep->add_option("--grid", grid, "start:stop:step or a comma list");
  sweep->add_option("--policy", sweep_policies, "Comma-separated policy list");
  sweep->add_option("--trials", sweep_trials, "Trials per grid point, warm-up included")->check(CLI::PositiveNumber);
  sweep->add_option("--warmup", warmup, "Warm-up trials (default a quarter)");
  sweep->add_flag("--fast", fast, "300 trials with 100 warm-up");
  sweep->add_option("--ipnn", ipnn_path, "Use this IPNN model at every point")->check(CLI::ExistingFile);

  // analytic-cdf
  int m = 1;
  double r_s = 200.0, ymin_db = -20.0, ymax_db = 40.0, ystep_db = 0.5;
  long samples = 1000000;
  std::string serving = "los";
  auto* analytic = app.add_subcommand("analytic-cdf", "Analytic SINR CDF against Monte Carlo");
  add_common(analytic, common);
  analytic->add_option("--m", m, "Nakagami shape")->check(CLI::PositiveNumber);
  analytic->add_option("--rs", r_s, "Serving BS horizontal distance, m")->check(CLI::NonNegativeNumber);
  analytic->add_option("--serving", serving, "Serving channel state")->check(CLI::IsMember({"los", "nlos"}));
  analytic->add_option("--samples", samples, "Monte-Carlo samples")->check(CLI::PositiveNumber);
  analytic->add_option("--ymin-db", ymin_db, "Grid start, dB");
  analytic->add_option("--ymax-db", ymax_db, "Grid end, dB");
  analytic->add_option("--ystep-db", ystep_db, "Grid step, dB")->check(CLI::PositiveNumber);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    if (!rev.empty()) rev.pop_back();  // program name
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << "run with --help for usage\n";
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    apply_threads(common);
    const auto t0 = std::chrono::steady_clock::now();
    auto done = [&](const fs::path& p) {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      err << "wrote " << p.string() << " (" << std::fixed << std::setprecision(1) << s << " s)" << std::endl;
    };
    const ScenarioConfig cfg = load_scenario(common);

    auto load_or_train_ipnn = [&](const ScenarioConfig& c) -> std::shared_ptr<const IpnnModel> {
      if (!ipnn_path.empty()) return std::make_shared<const IpnnModel>(IpnnModel::load(ipnn_path));
      IpnnCache cache;
      return cache.get(c, common.seed, log);
    };

    if (*gen_env) {
      const fs::path dir = prepare_out(common);
      const Trial trial = make_trial(cfg, common.seed, 0);
      std::ofstream e = open_out(dir / "environment.txt");
      write_environment(e, trial.env);
      std::ofstream t = open_out(dir / "trajectory.csv");
      t << "t,x_m,y_m,z_m,heading_deg\n" << std::setprecision(10);
      for (std::size_t i = 0; i < trial.trajectory.size(); ++i) {
        const Point3 p = trial.trajectory.point(i);
        const double h = i < trial.trajectory.headings_rad.size() ? rad_to_deg(trial.trajectory.headings_rad[i]) : 0.0;
        t << i << ',' << p.x << ',' << p.y << ',' << p.z << ',' << h << '\n';
      }
      err << trial.env.bs_count() << " base stations, " << trial.env.buildings().size() << " buildings\n";
      done(dir / "environment.txt");
    } else if (*gen_data) {
      const fs::path dir = prepare_out(common);
      IpnnDatasetConfig dc{cfg.env, cfg.radio, cfg.ipnn_min_height_m, cfg.ipnn_max_height_m};
      Rng rng = make_rng(common.seed, 0);
      const auto data = generate_ipnn_dataset(dc, data_trials, rng);
      std::ofstream os = open_out(dir / "ipnn_data.csv");
      write_ipnn_csv(os, data);
      done(dir / "ipnn_data.csv");
    } else if (*train_ipnn_cmd) {
      const fs::path dir = prepare_out(common);
      std::vector<IpnnSample> data;
      if (!data_path.empty()) {
        std::ifstream is(data_path);
        if (!is) throw Error(ErrorKind::Io, "cannot read " + data_path);
        data = read_ipnn_csv(is);
      } else {
        IpnnDatasetConfig dc{cfg.env, cfg.radio, cfg.ipnn_min_height_m, cfg.ipnn_max_height_m};
        Rng rng = make_rng(common.seed, 0);
        data = generate_ipnn_dataset(dc, cfg.ipnn_trials, rng);
      }
      IpnnTrainConfig tc = cfg.ipnn;
      tc.seed = stream_seed(common.seed, 1);
      IpnnTrainReport report;
      const IpnnModel model = train_ipnn(data, tc, &report);
      model.save((dir / "ipnn.model").string());
      std::ofstream rep = open_out(dir / "ipnn_report.csv");
      rep << std::setprecision(10) << "train_mse_db2,holdout_mse_db2,holdout_rmse_db,train_count,holdout_count\n"
          << report.train_mse_db2 << ',' << report.holdout_mse_db2 << ',' << report.holdout_rmse_db() << ','
          << report.train_count << ',' << report.holdout_count << '\n';
      err << "holdout RMSE " << std::setprecision(4) << report.holdout_rmse_db() << " dB\n";
      done(dir / "ipnn.model");
    } else if (*train_agent) {
      const fs::path dir = prepare_out(common);
      auto ipnn = load_or_train_ipnn(cfg);
      AgentConfig ac = cfg.agent;
      ac.seed = stream_seed(common.seed, 2);
      ac.norm = calibrate_normalisation(cfg, *ipnn, common.seed);
      Agent agent(ac);
      std::shared_ptr<Agent> handle(&agent, [](Agent*) {});
      auto policy = make_reqiba_policy(handle, ipnn, cfg.radio, true);
      std::ofstream curve = open_out(dir / "training_curve.csv");
      curve << "trial,throughput,handovers,epsilon\n" << std::setprecision(10);
      for (int k = 0; k < agent_trials; ++k) {
        const Trial trial = make_trial(cfg, common.seed, static_cast<std::uint64_t>(k));
        const EpisodeRecord rec = run_episode(trial, cfg.radio, *policy, cfg.xi);
        curve << k << ',' << rec.throughput << ',' << rec.handovers << ',' << agent.epsilon() << '\n';
        if ((k + 1) % 50 == 0) log("trial " + std::to_string(k + 1) + "/" + std::to_string(agent_trials));
      }
      agent.save((dir / "agent").string());
      ipnn->save((dir / "ipnn.model").string());
      done(dir / "agent");
    } else if (*eval) {
      const fs::path dir = prepare_out(common);
      const std::vector<PolicyKind> kinds = parse_policy_list(eval_policies);
      std::shared_ptr<Agent> agent;
      bool needs_ipnn = false;
      for (PolicyKind k : kinds) {
        needs_ipnn = needs_ipnn || k == PolicyKind::IpnnOnly || k == PolicyKind::Reqiba;
        if (k == PolicyKind::Reqiba) {
          if (agent_dir.empty()) throw Error(ErrorKind::Usage, "reqiba evaluation needs --agent");
          agent = std::make_shared<Agent>(Agent::load(agent_dir));
          if (agent->config().zeta != cfg.zeta) throw Error(ErrorKind::TopologyMismatch, "agent zeta differs from config");
          if (ipnn_path.empty() && fs::exists(fs::path(agent_dir).parent_path() / "ipnn.model")) {
            ipnn_path = (fs::path(agent_dir).parent_path() / "ipnn.model").string();
          }
        }
      }
      std::shared_ptr<const IpnnModel> ipnn;
      if (needs_ipnn) ipnn = load_or_train_ipnn(cfg);
      std::vector<PolicyKind> all = kinds;
      if (std::find(all.begin(), all.end(), PolicyKind::Closest) == all.end()) all.push_back(PolicyKind::Closest);
      // Evaluation trials sit past any training indices.
      const int first = 1000000;
      const auto samples = evaluate_frozen(cfg, all, ipnn, agent, common.seed, first, first + eval_trials, true);
      const double base = mean_ci(samples.at(PolicyKind::Closest).throughput).first;
      std::vector<MetricRow> rows;
      for (PolicyKind k : kinds) {
        MetricRow r;
        r.policy = k;
        std::tie(r.mean_throughput, r.ci_half) = mean_ci(samples.at(k).throughput);
        std::tie(r.handovers_per_episode, r.ho_ci_half) = mean_ci(samples.at(k).handovers);
        r.norm_throughput = k == PolicyKind::Closest ? 1.0 : (base > 0.0 ? r.mean_throughput / base : 0.0);
        r.trials = eval_trials;
        rows.push_back(r);
      }
      std::ofstream os = open_out(dir / "eval.csv");
      write_metrics_csv(os, rows);
      done(dir / "eval.csv");
    } else if (*sweep) {
      const fs::path dir = prepare_out(common);
      SweepSpec spec;
      spec.base = cfg;
      spec.param = sweep_param_from_string(param);
      spec.grid = parse_grid(grid);
      spec.policies = parse_policy_list(sweep_policies);
      spec.trials = sweep_trials;
      spec.warmup = warmup;
      spec.seed = common.seed;
      if (fast) apply_fast_profile(spec);
      if (!ipnn_path.empty()) spec.ipnn = std::make_shared<const IpnnModel>(IpnnModel::load(ipnn_path));
      const SweepResult result = run_sweep(spec, log);
      const fs::path file = dir / ("sweep_" + param + ".csv");
      std::ofstream os = open_out(file);
      write_metrics_csv(os, result.rows);
      done(file);
    } else if (*analytic) {
      const fs::path dir = prepare_out(common);
      if (ymax_db < ymin_db) throw Error(ErrorKind::Usage, "--ymax-db must not be below --ymin-db");
      FadingConfig fc;
      fc.m = m;
      fc.r_s_m = r_s;
      fc.uav_height_m = cfg.trajectory.uav_height_m;
      fc.serving = serving == "los" ? Channel::Los : Channel::Nlos;
      fc.radio = cfg.radio;
      fc.env = cfg.env;
      fc.los = LosProbability::itu(cfg.env, fc.uav_height_m);
      std::vector<double> y_db;
      const auto n = static_cast<long>(std::floor((ymax_db - ymin_db) / ystep_db + 1e-9));
      for (long i = 0; i <= n; ++i) y_db.push_back(ymin_db + static_cast<double>(i) * ystep_db);
      std::vector<double> y;
      for (double d : y_db) y.push_back(db_to_linear(d));
      const auto mc = mc_sinr_cdf(fc, y, samples, common.seed, true);
      std::ofstream os = open_out(dir / "analytic_cdf.csv");
      os << "y_db,f_analytic,f_mc,ks_running\n" << std::setprecision(10);
      double ks = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double fa = sinr_cdf(fc, y[i]);
        ks = std::max(ks, std::abs(fa - mc[i]));
        os << y_db[i] << ',' << fa << ',' << mc[i] << ',' << ks << '\n';
      }
      err << "KS distance " << std::setprecision(5) << ks << "\n";
      done(dir / "analytic_cdf.csv");
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::Usage ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace uavassoc
