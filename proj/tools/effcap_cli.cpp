// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The effcap Authors
//
// effcap: QoS-constrained throughput and power control experiments.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "effcap/experiment.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Overrides {
  std::string config;
  std::vector<double> theta;
  std::vector<double> snr_db;
  std::vector<std::string> constellation;
  std::string output;
  int threads = -1;
  bool verbose = false;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("-c,--config", o.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  sub->add_option("--theta", o.theta, "QoS exponent(s), overrides the config")->delimiter(',');
  sub->add_option("--snr-db", o.snr_db, "average SNR(s) in dB, overrides the config")->delimiter(',');
  sub->add_option("--constellation", o.constellation, "input name(s), overrides the config")->delimiter(',');
  sub->add_option("-o,--output", o.output, "output directory");
  sub->add_option("-j,--threads", o.threads, "worker threads (0 = hardware)")->check(CLI::NonNegativeNumber);
  sub->add_flag("-v,--verbose", o.verbose, "write solver convergence traces");
}

json load_config(const Overrides& o, const std::string& command) {
  std::ifstream is(o.config);
  if (!is) throw effcap::ConfigError("cannot open config '" + o.config + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw effcap::ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw effcap::ConfigError("config must be a JSON object");
  j["command"] = command;
  if (!o.theta.empty()) j["theta"] = o.theta;
  if (!o.snr_db.empty()) j["snr_db"] = o.snr_db;
  if (!o.constellation.empty()) j["constellation"] = o.constellation;
  if (!o.output.empty()) j["output"] = o.output;
  if (o.threads >= 0) j["threads"] = o.threads;
  if (o.verbose) j["verbose"] = true;
  return j;
}

int evaluate_policy(const std::string& path) {
  const effcap::StoredPolicy s = effcap::load_policy_csv(path);
  const auto input = effcap::cli::detail::parse_input(s.meta.at("constellation"));
  const effcap::QosParams q{s.meta.at("theta").get<double>(), s.meta.value("tb", 1.0)};
  const double cap = effcap::cli::detail::throughput(s.policy, q, input.constellation);
  json out = {{"file", path},
              {"capacity", cap},
              {"stored_capacity", s.meta.value("capacity", 0.0)},
              {"avg_snr", effcap::average_snr(s.policy)},
              {"alpha", s.policy.alpha}};
  std::cout << out.dump(2) << "\n";
  return effcap::cli::kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"effcap: effective capacity and power control under QoS constraints"};
  app.require_subcommand(1);
  Overrides o;
  std::vector<std::pair<CLI::App*, std::string>> commands;
  for (const char* name : {"solve", "capacity-sweep", "lowpower", "ee-tradeoff"}) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    add_common(sub, o);
    commands.emplace_back(sub, name);
  }
  std::string policy_path;
  CLI::App* eval = app.add_subcommand("evaluate", "recompute the capacity of a stored policy CSV");
  eval->add_option("policy", policy_path, "policy CSV")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : effcap::cli::kConfigError;
  }

  try {
    if (eval->parsed()) return evaluate_policy(policy_path);
    for (const auto& [sub, name] : commands) {
      if (!sub->parsed()) continue;
      const json j = load_config(o, name);
      const auto cfg = effcap::cli::parse_config(j, fs::path(o.config).parent_path());
      const auto res = effcap::cli::run(cfg);
      std::cout << res.summary.dump(2) << "\n";
      if (res.exit_code == effcap::cli::kInfeasible) std::cerr << "effcap: EE requirement is infeasible\n";
      return res.exit_code;
    }
  } catch (const effcap::ConfigError& e) {
    std::cerr << "effcap: configuration error: " << e.what() << "\n";
    return effcap::cli::kConfigError;
  } catch (const effcap::DomainError& e) {
    std::cerr << "effcap: configuration error: " << e.what() << "\n";
    return effcap::cli::kConfigError;
  } catch (const json::exception& e) {
    std::cerr << "effcap: configuration error: " << e.what() << "\n";
    return effcap::cli::kConfigError;
  } catch (const effcap::NumericalError& e) {
    std::cerr << "effcap: numerical failure: " << e.what() << "\n";
    return effcap::cli::kNonConvergence;
  }
  return effcap::cli::kConfigError;
}
