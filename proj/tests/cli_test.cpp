#include <gtest/gtest.h>
#include <sys/wait.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "effcap/experiment.hpp"

using namespace effcap;
using cli::json;
namespace fs = std::filesystem;

namespace {

struct Csv {
  json meta;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw std::runtime_error("no column " + name);
  }
  double num(std::size_t row, const std::string& name) const { return std::stod(rows.at(row).at(col(name))); }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

Csv read_csv(const fs::path& path) {
  std::ifstream is(path);
  EXPECT_TRUE(is) << path;
  Csv csv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind('#', 0) == 0) {
      csv.meta = json::parse(line.substr(1));
    } else if (csv.header.empty()) {
      csv.header = split(line);
    } else {
      csv.rows.push_back(split(line));
    }
  }
  return csv;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    static std::atomic<int> counter{0};
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           ("effcap_" + std::string(info->name()) + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const json& j, const std::string& name = "config.json") const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  static int run_binary(const std::string& args, const fs::path& stdout_path = "/dev/null") {
    const std::string cmd =
        std::string(EFFCAP_CLI_PATH) + " " + args + " > '" + stdout_path.string() + "' 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  json base(const std::string& command) const {
    return {{"command", command},
            {"constellation", "qpsk"},
            {"fading", {{"nakagami", {{"m", 1.0}}}}},
            {"theta", 0.1},
            {"snr_db", 0.0},
            {"output", (dir_ / "out").string()},
            {"threads", 2}};
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, ConfigValidation) {
  auto bad = [&](json j) { EXPECT_THROW(cli::parse_config(j, dir_), ConfigError) << j.dump(); };
  json j = base("solve");
  j["theta"] = json::array();
  bad(j);
  j = base("solve");
  j["snr_db"] = {3.0, 1.0};
  bad(j);
  j = base("solve");
  j.erase("fading");
  bad(j);
  j = base("plot");
  bad(j);
  j = base("solve");
  j["fading"] = {{"rician", {{"k", 1.0}, {"k_db", 0.0}}}};
  bad(j);
  j = base("solve");
  j["solver"] = {{"tolerance", 1e-3}};
  bad(j);
  j = base("solve");
  j["constellation"] = "8psk";
  bad(j);
  j = base("ee-tradeoff");
  bad(j);
  j = base("solve");
  j["theta"] = -1.0;
  bad(j);
  j = base("solve");
  j["snr_db"] = "ten";
  bad(j);

  j = base("solve");
  j["constellation"] = json::array({"bpsk", {{"name", "tri"}, {"points", {{1, 0}, {-0.5, 0.866}, {-0.5, -0.866}}}}});
  j["fading"] = {{"rician", {{"k_db", 5.0}}}};
  const cli::ExperimentConfig cfg = cli::parse_config(j, dir_);
  ASSERT_EQ(cfg.inputs.size(), 2u);
  EXPECT_EQ(cfg.inputs[1].label, "tri");
  EXPECT_NEAR(cfg.fading->k(), std::pow(10.0, 0.5), 1e-12);
}

TEST_F(CliTest, EmpiricalFadingFromFile) {
  json j = base("solve");
  j["fading"] = {{"empirical", {{"path", std::string(EFFCAP_TEST_DATA) + "/gains.csv"}}}};
  const cli::ExperimentConfig cfg = cli::parse_config(j, dir_);
  EXPECT_EQ(cfg.fading->kind(), FadingKind::Empirical);
  EXPECT_NEAR(cfg.fading->moments().mean, 1.0, 0.05);
  const cli::RunResult res = cli::run(cfg);
  EXPECT_EQ(res.exit_code, cli::kOk);
  EXPECT_NEAR(res.summary["runs"][0]["avg_snr"].get<double>(), 1.0, 1e-9);
}

TEST_F(CliTest, BinaryExitCodes) {
  json j = base("solve");
  j["theta"] = json::array();
  EXPECT_EQ(run_binary("solve -c '" + write_config(j).string() + "'"), cli::kConfigError);
  EXPECT_EQ(run_binary("solve -c '" + (dir_ / "missing.json").string() + "'"), cli::kConfigError);
  EXPECT_EQ(run_binary("frobnicate"), cli::kConfigError);
  EXPECT_EQ(run_binary("--help"), 0);
  std::ofstream(dir_ / "broken.json") << "{ not json";
  EXPECT_EQ(run_binary("solve -c '" + (dir_ / "broken.json").string() + "'"), cli::kConfigError);

  json ee = base("solve");
  ee["ee"] = {{"ee_min", 100.0}, {"p_circuit_n", 1.0}};
  EXPECT_EQ(run_binary("solve -c '" + write_config(ee, "ee.json").string() + "'"), cli::kInfeasible);

  json nc = base("solve");
  nc["solver"] = {{"polish", false}, {"max_outer", 2}};
  EXPECT_EQ(run_binary("solve -c '" + write_config(nc, "nc.json").string() + "'"), cli::kNonConvergence);
}

TEST_F(CliTest, ThetaSweepWritesOnePolicyPerPoint) {
  const fs::path cfg = write_config(base("solve"));
  const fs::path out = dir_ / "sweep";
  ASSERT_EQ(run_binary("solve -c '" + cfg.string() + "' --theta 0.01,0.1,1 -o '" + out.string() + "'"), 0);
  double prev = detail::kInf;
  for (const char* t : {"0.01", "0.1", "1"}) {
    const fs::path file = out / (std::string("policy_qpsk_theta") + t + "_snr0dB.csv");
    ASSERT_TRUE(fs::exists(file)) << file;
    const StoredPolicy s = load_policy_csv(file.string());
    const double cap = s.meta.at("capacity").get<double>();
    EXPECT_LT(cap, prev) << t;
    prev = cap;
    EXPECT_EQ(s.meta.at("constellation"), "qpsk");
  }
  const json summary = json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(summary["runs"].size(), 3u);
}

TEST_F(CliTest, PolicyRoundTripThroughEvaluate) {
  json j = base("solve");
  j["theta"] = {0.5};
  j["constellation"] = json::array({"16qam", {{"name", "tri"}, {"points", {{1, 0}, {-0.5, 0.866}, {-0.5, -0.866}}}}});
  const cli::RunResult res = cli::run(cli::parse_config(j, dir_));
  for (std::size_t i = 0; i < 2; ++i) {
    const std::string file = res.summary["runs"][i]["file"].get<std::string>();
    const fs::path report = dir_ / ("eval" + std::to_string(i) + ".json");
    ASSERT_EQ(run_binary("evaluate '" + file + "'", report), 0);
    const json r = json::parse(slurp(report));
    EXPECT_NEAR(r["capacity"].get<double>(), r["stored_capacity"].get<double>(),
                1e-6 * r["stored_capacity"].get<double>());
    EXPECT_NEAR(r["avg_snr"].get<double>(), 1.0, 1e-9);
  }
}

TEST_F(CliTest, PolicyCsvRoundTripInMemory) {
  const PowerPolicy p = solve_policy(FadingModel::rician(3.0), {1.0, 1.0}, Constellation::bpsk(), 2.0);
  std::stringstream ss;
  write_policy_csv(ss, p, {{"theta", 1.0}});
  const StoredPolicy back = read_policy_csv(ss);
  EXPECT_EQ(back.policy.mu, p.mu);
  EXPECT_EQ(back.policy.grid.nodes, p.grid.nodes);
  EXPECT_EQ(back.policy.grid.weights, p.grid.weights);
  EXPECT_EQ(back.policy.alpha, p.alpha);
  EXPECT_EQ(back.meta.at("theta"), 1.0);
  std::stringstream broken("# {}\nz,mu,weight\n1.0,abc,0.5\n");
  EXPECT_THROW(read_policy_csv(broken), ConfigError);
}

TEST_F(CliTest, LargeThetaGaussianReceivedSnr) {
  // Gaussian input: mu z = (z / alpha)^{1/(beta+1)} - 1 above the cutoff.
  json j = base("solve");
  j["constellation"] = "gaussian";
  j["theta"] = {10.0, 100.0};
  const cli::RunResult res = cli::run(cli::parse_config(j, dir_));
  const FadingModel f = FadingModel::rayleigh();
  double prev_spread = detail::kInf;
  for (std::size_t i = 0; i < 2; ++i) {
    const StoredPolicy s = load_policy_csv(res.summary["runs"][i]["file"].get<std::string>());
    const double beta = s.meta.at("theta").get<double>() * detail::kLog2e;
    double rmin = detail::kInf;
    double rmax = 0.0;
    for (std::size_t k = 0; k < s.policy.size(); ++k) {
      const double z = s.policy.grid.nodes[k];
      if (z <= s.policy.alpha) continue;
      const double r = s.policy.mu[k] * z;
      const double closed = std::pow(z / s.policy.alpha, 1.0 / (beta + 1.0)) - 1.0;
      EXPECT_NEAR(r, closed, 1e-6 * closed);
      if (z >= f.quantile(0.05) && z <= f.quantile(0.95)) {
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
      }
    }
    const double spread = (rmax - rmin) / rmax;
    EXPECT_LT(spread, prev_spread);
    prev_spread = spread;
  }
}

TEST_F(CliTest, CapacitySweepSaturationAndInputs) {
  json j = base("capacity-sweep");
  j["constellation"] = {"gaussian", "qpsk"};
  j["theta"] = {0.1, 10.0};
  j["snr_db"] = {0.0, 20.0};
  j["policies"] = {"optimal", "constant"};
  const cli::RunResult res = cli::run(cli::parse_config(j, dir_));
  const Csv csv = read_csv(res.files.front());
  ASSERT_EQ(csv.rows.size(), 2u * 2u * 2u * 2u);
  EXPECT_EQ(csv.meta.at("command"), "capacity-sweep");
  auto find = [&](const std::string& c, double theta, double snr, const std::string& pol) {
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
      if (csv.rows[r][csv.col("constellation")] == c && csv.num(r, "theta") == theta &&
          csv.num(r, "snr_db") == snr && csv.rows[r][csv.col("policy")] == pol) {
        return csv.num(r, "capacity");
      }
    }
    ADD_FAILURE() << "missing row";
    return 0.0;
  };
  EXPECT_NEAR(find("qpsk", 0.1, 20.0, "optimal") / 2.0, 1.0, 0.02);
  const double g = find("gaussian", 10.0, 0.0, "optimal");
  const double q = find("qpsk", 10.0, 0.0, "optimal");
  EXPECT_LE((g - q) / g, 0.05);
  EXPECT_GE(find("qpsk", 0.1, 0.0, "optimal"), find("qpsk", 0.1, 0.0, "constant"));

  json one = base("capacity-sweep");
  one["output"] = (dir_ / "one").string();
  const Csv single = read_csv(cli::run(cli::parse_config(one, dir_)).files.front());
  EXPECT_EQ(single.rows.size(), 1u);
}

TEST_F(CliTest, ZeroThetaUsesErgodicRate) {
  json j = base("capacity-sweep");
  j["theta"] = 0.0;
  j["policies"] = {"optimal", "mercury_waterfilling", "channel_inversion", "low_power"};
  j["fading"] = {{"nakagami", {{"m", 2.0}}}};
  const Csv csv = read_csv(cli::run(cli::parse_config(j, dir_)).files.front());
  ASSERT_EQ(csv.rows.size(), 4u);
  EXPECT_DOUBLE_EQ(csv.num(0, "capacity"), csv.num(1, "capacity"));
  EXPECT_NEAR(csv.num(2, "capacity"), Constellation::qpsk().mi(0.5), 1e-12);
}

TEST_F(CliTest, LowPowerIntercepts) {
  json j = base("lowpower");
  j["constellation"] = {"gaussian", "bpsk", "qpsk", "16qam"};
  j["theta"] = {0.01, 1.0};
  j["snr_db"] = {-40.0, -30.0, -20.0, -10.0};
  const cli::RunResult res = cli::run(cli::parse_config(j, dir_));
  const Csv csv = read_csv(dir_ / "out" / "lowpower.csv");
  ASSERT_EQ(csv.rows.size(), 4u * 2u * 4u);
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    if (csv.num(r, "snr_db") == -40.0) { EXPECT_NEAR(csv.num(r, "eb_n0_db"), -1.59, 0.02) << r; }
    EXPECT_GE(csv.num(r, "capacity_linear"), 0.0);
  }
  const json metrics = json::parse(slurp(dir_ / "out" / "lowpower_metrics.json"));
  ASSERT_EQ(metrics.size(), 8u);
  for (std::size_t i = 0; i < metrics.size(); i += 2) {
    EXPECT_NEAR(metrics[i]["eb_n0_min_db"].get<double>(), -1.59, 0.02);
    EXPECT_EQ(metrics[i]["eb_n0_min_db"], metrics[i + 1]["eb_n0_min_db"]);
    EXPECT_GT(metrics[i]["s0"].get<double>(), metrics[i + 1]["s0"].get<double>());
  }
  EXPECT_EQ(res.files.size(), 2u);
}

TEST_F(CliTest, RicianSlopeGrowsWithK) {
  double prev_s0 = 0.0;
  for (double k : {0.0, 3.16}) {
    json j = base("lowpower");
    j["fading"] = {{"rician", {{"k", k}}}};
    j["output"] = (dir_ / ("k" + std::to_string(k))).string();
    const cli::RunResult res = cli::run(cli::parse_config(j, dir_));
    const json m = res.summary["metrics"][0];
    EXPECT_NEAR(m["eb_n0_min_db"].get<double>(), -1.5917, 1e-4);
    EXPECT_GT(m["s0"].get<double>(), prev_s0);
    prev_s0 = m["s0"].get<double>();
  }
}

TEST_F(CliTest, EeTradeoffSweep) {
  json j = base("ee-tradeoff");
  j["constellation"] = "gaussian";
  j["snr_db"] = 6.0;
  j["ee"] = {{"p_circuit_n", 1.0}, {"gain_pct", {0.0, 50.0, 80.0, 95.0, 100.0}}};
  const cli::ExperimentConfig cfg = cli::parse_config(j, dir_);
  cli::run(cfg);
  const Csv csv = read_csv(dir_ / "out" / "ee_tradeoff.csv");
  ASSERT_EQ(csv.rows.size(), 5u);
  for (std::size_t r = 1; r < csv.rows.size(); ++r) {
    EXPECT_LE(csv.num(r, "capacity"), csv.num(r - 1, "capacity") + 1e-12) << r;
    EXPECT_NE(csv.rows[r][csv.col("status")], "infeasible");
  }

  const FadingModel f = FadingModel::rayleigh();
  const QosParams q{0.1, 1.0};
  const Constellation c = Constellation::gaussian();
  const double cap = std::pow(10.0, 0.6);
  EXPECT_NEAR(csv.num(0, "capacity"), effective_capacity(solve_policy(f, q, c, cap), q, c), 1e-12);

  // EE maximizer by a direct scan over the average SNR.
  const EeParams ee{0.0, 1.0, 1.0, 1.0};
  double best_ee = 0.0;
  double best_cap = 0.0;
  double best_snr = 0.0;
  auto visit = [&](double snr) {
    const PowerPolicy p = solve_policy(f, q, c, snr);
    const double e = achieved_ee(p, q, c, ee);
    if (e > best_ee) {
      best_ee = e;
      best_cap = effective_capacity(p, q, c);
      best_snr = snr;
    }
  };
  for (double snr = 0.2; snr <= cap; snr *= 1.02) visit(snr);
  const double centre = best_snr;
  for (double snr = centre / 1.02; snr <= std::min(cap, centre * 1.02); snr *= 1.0005) visit(snr);
  EXPECT_NEAR(csv.num(4, "capacity") / best_cap, 1.0, 5e-3);
  EXPECT_NEAR(csv.num(4, "achieved_ee") / best_ee, 1.0, 1e-5);
  EXPECT_NEAR(csv.num(3, "achieved_ee") / csv.num(3, "ee_min"), 1.0, 1e-4);
}

TEST_F(CliTest, OutputsAreDeterministic) {
  json j = base("capacity-sweep");
  j["constellation"] = {"bpsk", "qpsk"};
  j["theta"] = {0.01, 0.1, 1.0};
  j["snr_db"] = {-5.0, 0.0, 5.0};
  j["threads"] = 1;
  j["output"] = (dir_ / "a").string();
  cli::run(cli::parse_config(j, dir_));
  j["threads"] = 4;
  j["output"] = (dir_ / "b").string();
  cli::run(cli::parse_config(j, dir_));
  const std::string a = slurp(dir_ / "a" / "capacity.csv");
  const std::string b = slurp(dir_ / "b" / "capacity.csv");
  // Only the echoed config line differs.
  EXPECT_EQ(a.substr(a.find('\n')), b.substr(b.find('\n')));
}

TEST_F(CliTest, VerboseWritesTraces) {
  const fs::path cfg = write_config(base("solve"));
  const fs::path out = dir_ / "trace";
  ASSERT_EQ(run_binary("solve -c '" + cfg.string() + "' -v -o '" + out.string() + "'"), 0);
  const Csv trace = read_csv(out / "trace_policy_qpsk_theta0.1_snr0dB.csv");
  ASSERT_GE(trace.rows.size(), 2u);
  EXPECT_EQ(trace.rows.back()[trace.col("phase")], "final");
}

TEST(ParallelMap, KeepsOrderAndRethrowsFirstFailure) {
  const auto v = cli::parallel_map<int>(100, 4, [](std::size_t i) { return static_cast<int>(i * i); });
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], static_cast<int>(i * i));
  try {
    cli::parallel_map<int>(50, 3, [](std::size_t i) -> int {
      if (i == 7 || i == 30) throw ConfigError("fail " + std::to_string(i));
      return 0;
    });
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "fail 7");
  }
}
