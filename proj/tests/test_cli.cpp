#include <catch_amalgamated.hpp>

#include <algorithm>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "uavassoc/cli.hpp"
#include "uavassoc/config.hpp"

using namespace uavassoc;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "uavassoc");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("uavassoc_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config files parse, round-trip and report errors", "[cli]") {
  std::istringstream in("# comment\nradio.tx_power_w = 20   # trailing\n\nfeatures.zeta = 6\nradio.beamwidth_deg = 30\n");
  const ScenarioConfig c = parse_config(in);
  REQUIRE(c.radio.tx_power_w == 20.0);
  REQUIRE(c.zeta == 6);
  REQUIRE(c.agent.zeta == 6);
  REQUIRE(c.radio.beamwidth_rad == Catch::Approx(std::numbers::pi / 6));

  std::ostringstream os;
  write_config(os, c);
  const std::string text = os.str();
  std::istringstream back_in(text);
  const ScenarioConfig back = parse_config(back_in);
  std::ostringstream again;
  write_config(again, back);
  REQUIRE(again.str() == text);
  REQUIRE(config_keys().size() == static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));

  std::istringstream bad_key("radio.nope = 1\n");
  REQUIRE_THROWS_AS(parse_config(bad_key), Error);
  std::istringstream bad_value("\n\nradio.tx_power_w = lots\n");
  try {
    parse_config(bad_value);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::InvalidConfig);
    REQUIRE(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::istringstream no_eq("radio.tx_power_w 40\n");
  REQUIRE_THROWS_AS(parse_config(no_eq), Error);
}

TEST_CASE("usage errors exit nonzero", "[cli]") {
  REQUIRE(cli({}).code != 0);
  REQUIRE(cli({"frobnicate"}).code != 0);
  REQUIRE(cli({"gen-env", "--config", "/nonexistent/uavassoc.cfg"}).code != 0);
  const fs::path dir = scratch("usage");
  REQUIRE(cli({"eval", "--policy", "nearest", "--trials", "2", "--out", dir.string()}).code == 2);
  REQUIRE(cli({"sweep", "--param", "altitude", "--grid", "100", "--out", dir.string()}).code != 0);
  REQUIRE(cli({"gen-env", "--set", "radio.nope=1", "--out", dir.string()}).code != 0);
  const Run help = cli({"--help"});
  REQUIRE(help.code == 0);
  REQUIRE(help.out.find("sweep") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("same seed gives byte-identical outputs", "[cli]") {
  const fs::path a = scratch("a"), b = scratch("b"), c = scratch("c");
  const fs::path cfg = fs::temp_directory_path() / "uavassoc_cli_test.cfg";
  {
    std::ofstream os(cfg);
    os << "trajectory.timesteps = 30\n";
  }
  for (const fs::path& d : {a, b}) {
    REQUIRE(cli({"gen-env", "--seed", "7", "--config", cfg.string(), "--out", d.string()}).code == 0);
    REQUIRE(cli({"sweep", "--param", "uav_height", "--grid", "60,120", "--policy", "closest,sinr,meandist",
                 "--trials", "6", "--warmup", "0", "--seed", "7", "--threads", "1", "--config", cfg.string(), "--out",
                 d.string()})
                .code == 0);
    REQUIRE(cli({"analytic-cdf", "--samples", "20000", "--seed", "7", "--ystep-db", "5", "--threads", "1", "--out",
                 d.string()})
                .code == 0);
  }
  for (const char* f : {"environment.txt", "trajectory.csv", "sweep_uav_height.csv", "analytic_cdf.csv"}) {
    REQUIRE(fs::exists(a / f));
    REQUIRE(slurp(a / f) == slurp(b / f));
  }
  REQUIRE(cli({"gen-env", "--seed", "8", "--out", c.string()}).code == 0);
  REQUIRE(slurp(a / "environment.txt") != slurp(c / "environment.txt"));

  const std::string sweep = slurp(a / "sweep_uav_height.csv");
  REQUIRE(sweep.rfind("param_value,policy,mean_throughput,norm_throughput,ci_half,handovers_per_episode,ho_ci_half,trials\n", 0) == 0);
  REQUIRE(std::count(sweep.begin(), sweep.end(), '\n') == 7);
  REQUIRE(slurp(a / "analytic_cdf.csv").rfind("y_db,f_analytic,f_mc,ks_running\n", 0) == 0);
  for (const fs::path& d : {a, b, c}) fs::remove_all(d);
  fs::remove(cfg);
}
