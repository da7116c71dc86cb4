// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The effcap Authors
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "effcap/capacity.hpp"
#include "effcap/constellation.hpp"
#include "effcap/error.hpp"
#include "effcap/fading.hpp"
#include "effcap/lowpower.hpp"
#include "effcap/policy_io.hpp"
#include "effcap/solver.hpp"

namespace effcap::cli {

using nlohmann::json;

enum ExitCode : int { kOk = 0, kConfigError = 2, kNonConvergence = 3, kInfeasible = 4 };

enum class Command { Solve, CapacitySweep, LowPower, EeTradeoff };

inline Command parse_command(const std::string& s) {
  if (s == "solve") return Command::Solve;
  if (s == "capacity-sweep" || s == "capacity_sweep") return Command::CapacitySweep;
  if (s == "lowpower" || s == "low-power" || s == "low_power") return Command::LowPower;
  if (s == "ee-tradeoff" || s == "ee_tradeoff") return Command::EeTradeoff;
  throw ConfigError("unknown command '" + s + "'");
}

inline const char* command_name(Command c) {
  switch (c) {
    case Command::Solve:
      return "solve";
    case Command::CapacitySweep:
      return "capacity-sweep";
    case Command::LowPower:
      return "lowpower";
    case Command::EeTradeoff:
      return "ee-tradeoff";
  }
  return "?";
}

enum class PolicyKind { Optimal, Constant, ChannelInversion, MercuryWaterfilling, LowPower };

inline PolicyKind parse_policy_kind(const std::string& s) {
  if (s == "optimal") return PolicyKind::Optimal;
  if (s == "constant") return PolicyKind::Constant;
  if (s == "channel_inversion") return PolicyKind::ChannelInversion;
  if (s == "mercury_waterfilling") return PolicyKind::MercuryWaterfilling;
  if (s == "low_power") return PolicyKind::LowPower;
  throw ConfigError("unknown policy '" + s + "'");
}

inline double from_db(double x_db) { return std::pow(10.0, x_db / 10.0); }

struct InputSpec {
  std::string label;
  Constellation constellation;
};

struct EeSpec {
  EeParams params;
  std::vector<double> gain_pct;  // ee_tradeoff sweep, percent of the maximum EE
};

struct ExperimentConfig {
  Command command = Command::Solve;
  std::vector<InputSpec> inputs;
  std::optional<FadingModel> fading;
  json fading_echo;
  std::vector<double> theta;
  std::vector<double> snr_db;
  double tb = 1.0;
  std::optional<EeSpec> ee;
  SolverConfig solver;
  std::vector<std::string> policies{"optimal"};
  std::string output = ".";
  int threads = 0;
  bool verbose = false;
  json raw;
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline std::vector<double> parse_sweep(const json& j, const std::string& key) {
  std::vector<double> v;
  if (j.is_number()) {
    v.push_back(j.get<double>());
  } else if (j.is_array()) {
    for (const auto& x : j) {
      if (!x.is_number()) throw ConfigError("'" + key + "' entries must be numbers");
      v.push_back(x.get<double>());
    }
  } else {
    throw ConfigError("'" + key + "' must be a number or a list of numbers");
  }
  if (v.empty()) throw ConfigError("'" + key + "' sweep is empty");
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) throw ConfigError("'" + key + "' sweep must be strictly ascending");
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw ConfigError("'" + key + "' entries must be finite");
  }
  return v;
}

inline InputSpec parse_input(const json& j) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    return {name, Constellation::from_name(name)};
  }
  if (!j.is_object()) throw ConfigError("constellation entries must be names or objects");
  const std::string name = j.value("name", std::string("custom"));
  Constellation c = Constellation::gaussian();
  if (j.contains("points")) {
    std::vector<std::complex<double>> pts;
    for (const auto& p : j.at("points")) {
      if (p.is_number()) {
        pts.emplace_back(p.get<double>(), 0.0);
      } else if (p.is_array() && p.size() == 2) {
        pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      } else {
        throw ConfigError("constellation points must be numbers or [re, im] pairs");
      }
    }
    c = Constellation::from_points(name, std::move(pts));
  } else {
    c = Constellation::from_name(name);
  }
  if (j.contains("curvature")) c = c.with_curvature(j.at("curvature").get<double>());
  return {name, c};
}

inline std::vector<double> read_gain_samples(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open gain samples '" + path.string() + "'");
  std::vector<double> out;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        out.push_back(v);
      } catch (const std::exception&) {
        if (!first) throw ConfigError("gain samples: bad value '" + cell + "'");
      }
    }
    first = false;
  }
  if (out.empty()) throw ConfigError("gain samples file is empty");
  return out;
}

inline FadingModel parse_fading(const json& j, const std::filesystem::path& base) {
  if (!j.is_object() || j.size() != 1) throw ConfigError("fading must be an object with exactly one kind");
  const auto& [kind, p] = *j.items().begin();
  if (kind == "nakagami") return FadingModel::nakagami(p.value("m", 1.0), p.value("omega", 1.0));
  if (kind == "rician") {
    if (p.contains("k_db") == p.contains("k")) throw ConfigError("rician fading needs exactly one of k_db, k");
    const double k = p.contains("k_db") ? from_db(p.at("k_db").get<double>()) : p.at("k").get<double>();
    return FadingModel::rician(k, p.value("omega", 1.0));
  }
  if (kind == "empirical") {
    std::filesystem::path path = p.at("path").get<std::string>();
    if (path.is_relative()) path = base / path;
    return FadingModel::empirical(read_gain_samples(path));
  }
  throw ConfigError("unknown fading kind '" + kind + "'");
}

inline void apply_solver_overrides(SolverConfig& s, const json& j) {
  if (!j.is_object()) throw ConfigError("'solver' must be an object");
  for (const auto& [key, v] : j.items()) {
    if (key == "eps") s.eps = v.get<double>();
    else if (key == "delta") s.delta = v.get<double>();
    else if (key == "zeta") s.zeta = v.get<double>();
    else if (key == "max_inner") s.max_inner = v.get<int>();
    else if (key == "max_outer") s.max_outer = v.get<int>();
    else if (key == "mu_hi_init") s.mu_hi_init = v.get<double>();
    else if (key == "mu_lo_init") s.mu_lo_init = v.get<double>();
    else if (key == "grid_points") s.grid_points = v.get<int>();
    else if (key == "alpha_init") s.alpha_init = v.get<double>();
    else if (key == "mu_rel_tol") s.mu_rel_tol = v.get<double>();
    else if (key == "polish") s.polish = v.get<bool>();
    else if (key == "handoff") s.handoff = v.get<int>();
    else throw ConfigError("unknown solver option '" + key + "'");
  }
  s.validate();
}

}  // namespace detail

// Builds a validated configuration. `base` resolves relative data paths.
inline ExperimentConfig parse_config(const json& j, const std::filesystem::path& base = ".") {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig cfg;
  cfg.raw = j;
  try {
    if (!j.contains("command")) throw ConfigError("config needs a 'command'");
    cfg.command = parse_command(j.at("command").get<std::string>());
    if (!j.contains("constellation")) throw ConfigError("config needs a 'constellation'");
    const json& cj = j.at("constellation");
    if (cj.is_array()) {
      if (cj.empty()) throw ConfigError("'constellation' list is empty");
      for (const auto& e : cj) cfg.inputs.push_back(detail::parse_input(e));
    } else {
      cfg.inputs.push_back(detail::parse_input(cj));
    }
    if (!j.contains("fading")) throw ConfigError("config needs a 'fading' model");
    cfg.fading = detail::parse_fading(j.at("fading"), base);
    cfg.fading_echo = j.at("fading");
    if (!j.contains("theta")) throw ConfigError("config needs 'theta'");
    cfg.theta = detail::parse_sweep(j.at("theta"), "theta");
    for (double t : cfg.theta) {
      if (t < 0.0) throw ConfigError("theta must be >= 0");
    }
    if (!j.contains("snr_db")) throw ConfigError("config needs 'snr_db'");
    cfg.snr_db = detail::parse_sweep(j.at("snr_db"), "snr_db");
    cfg.tb = j.value("tb", 1.0);
    if (!(cfg.tb > 0.0)) throw ConfigError("tb must be > 0");
    if (j.contains("ee")) {
      const json& e = j.at("ee");
      EeSpec spec;
      spec.params.ee_min = e.value("ee_min", 0.0);
      spec.params.p_circuit_n = e.value("p_circuit_n", 0.0);
      spec.params.xi = e.value("xi", 1.0);
      spec.params.n0b = e.value("n0b", 1.0);
      spec.params.validate();
      if (e.contains("gain_pct")) spec.gain_pct = detail::parse_sweep(e.at("gain_pct"), "ee.gain_pct");
      cfg.ee = spec;
    }
    if (cfg.command == Command::EeTradeoff && (!cfg.ee || cfg.ee->gain_pct.empty())) {
      throw ConfigError("ee-tradeoff needs 'ee.gain_pct'");
    }
    if (j.contains("solver")) detail::apply_solver_overrides(cfg.solver, j.at("solver"));
    if (j.contains("policies")) {
      cfg.policies.clear();
      for (const auto& p : j.at("policies")) cfg.policies.push_back(p.get<std::string>());
      if (cfg.policies.empty()) throw ConfigError("'policies' list is empty");
      for (const auto& p : cfg.policies) (void)parse_policy_kind(p);
    }
    cfg.output = j.value("output", std::string("."));
    cfg.threads = j.value("threads", 0);
    cfg.verbose = j.value("verbose", false);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Execution

// Runs fn(i) for i in [0, n) on a worker pool; results keep index order. The
// exception of the lowest failing index is rethrown.
template <class T, class F>
std::vector<T> parallel_map(std::size_t n, int threads, F fn) {
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::size_t count = threads > 0 ? static_cast<std::size_t>(threads)
                                   : std::max(1u, std::thread::hardware_concurrency());
  count = std::min(count, std::max<std::size_t>(n, 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

struct RunResult {
  int exit_code = kOk;
  json summary = json::object();
  std::vector<std::string> files;
};

namespace detail {

inline std::string tag(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path.string() + "'");
  os << text;
}

inline std::string metadata_line(const ExperimentConfig& cfg) { return "# " + cfg.raw.dump() + "\n"; }

// Capacity in bits per symbol; the ergodic rate when theta = 0.
inline double throughput(const PowerPolicy& p, const QosParams& q, const Constellation& c) {
  return q.theta > 0.0 ? effective_capacity(p, q, c) : average_rate(p, c);
}

inline PowerPolicy make_policy(PolicyKind kind, const ExperimentConfig& cfg, const Constellation& c,
                               const QosParams& q, double snr, const SolverConfig& solver) {
  const FadingModel& f = *cfg.fading;
  switch (kind) {
    case PolicyKind::Optimal:
      return q.theta > 0.0 ? solve_policy(f, q, c, snr, solver) : mercury_waterfilling_policy(f, c, snr, solver);
    case PolicyKind::Constant:
      return constant_power_policy(f, snr, solver.grid_points);
    case PolicyKind::ChannelInversion:
      return channel_inversion_policy(f, snr, solver.grid_points);
    case PolicyKind::MercuryWaterfilling:
      return mercury_waterfilling_policy(f, c, snr, solver);
    case PolicyKind::LowPower:
      return low_power_policy(f, c, q, snr, solver);
  }
  throw ConfigError("unknown policy kind");
}

struct Point {
  std::size_t input = 0;
  double theta = 0.0;
  double snr_db = 0.0;
};

inline std::vector<Point> grid_points(const ExperimentConfig& cfg) {
  std::vector<Point> pts;
  for (std::size_t i = 0; i < cfg.inputs.size(); ++i) {
    for (double t : cfg.theta) {
      for (double s : cfg.snr_db) pts.push_back({i, t, s});
    }
  }
  return pts;
}

inline json policy_meta(const ExperimentConfig& cfg, const Point& pt, double capacity, double avg) {
  json m;
  m["theta"] = pt.theta;
  m["tb"] = cfg.tb;
  m["snr_db"] = pt.snr_db;
  m["constellation"] = cfg.raw.at("constellation").is_array() ? cfg.raw.at("constellation").at(pt.input)
                                                             : cfg.raw.at("constellation");
  m["fading"] = cfg.fading_echo;
  m["capacity"] = capacity;
  m["avg_snr"] = avg;
  return m;
}

inline std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream os;
  os << "iteration,phase,alpha,avg_snr,capacity\n";
  for (const auto& r : rows) {
    os << r.iteration << ',' << r.phase << ',' << format_double(r.alpha) << ',' << format_double(r.avg_snr)
       << ',' << format_double(r.capacity) << '\n';
  }
  return os.str();
}

}  // namespace detail

inline RunResult run_solve(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output);
  const auto pts = detail::grid_points(cfg);
  const PolicyKind kind = parse_policy_kind(cfg.policies.front());
  struct Out {
    json row;
    std::string file;
    bool infeasible = false;
  };
  auto rows = parallel_map<Out>(pts.size(), cfg.threads, [&](std::size_t i) {
    const auto& pt = pts[i];
    const InputSpec& in = cfg.inputs[pt.input];
    const QosParams q{pt.theta, cfg.tb};
    const double snr = from_db(pt.snr_db);
    SolverConfig solver = cfg.solver;
    std::vector<TraceRow> trace;
    if (cfg.verbose) solver.trace = [&](const TraceRow& r) { trace.push_back(r); };
    Out out;
    PowerPolicy p;
    std::string binding;
    if (cfg.ee && cfg.ee->params.ee_min > 0.0) {
      const EeSolution s = solve_policy_ee(*cfg.fading, q, in.constellation, cfg.ee->params, snr, solver);
      p = s.policy;
      binding = to_string(s.binding);
      out.infeasible = s.binding == Binding::Infeasible;
    } else {
      p = detail::make_policy(kind, cfg, in.constellation, q, snr, solver);
    }
    const double cap = detail::throughput(p, q, in.constellation);
    const double avg = average_snr(p);
    const std::string stem = "policy_" + in.label + "_theta" + detail::tag(pt.theta) + "_snr" +
                             detail::tag(pt.snr_db) + "dB";
    const fs::path file = fs::path(cfg.output) / (stem + ".csv");
    json meta = detail::policy_meta(cfg, pt, cap, avg);
    save_policy_csv(file.string(), p, meta);
    if (cfg.verbose) detail::write_text(fs::path(cfg.output) / ("trace_" + stem + ".csv"), detail::trace_csv(trace));
    out.file = file.string();
    out.row = {{"constellation", in.label}, {"theta", pt.theta}, {"snr_db", pt.snr_db}, {"alpha", p.alpha},
               {"capacity", cap},           {"avg_snr", avg},    {"policy", p.label},   {"file", out.file}};
    if (!binding.empty()) out.row["binding"] = binding;
    return out;
  });
  RunResult res;
  res.summary["command"] = "solve";
  res.summary["runs"] = json::array();
  for (auto& r : rows) {
    res.summary["runs"].push_back(r.row);
    res.files.push_back(r.file);
    if (r.infeasible) res.exit_code = kInfeasible;
  }
  const fs::path summary = fs::path(cfg.output) / "summary.json";
  detail::write_text(summary, res.summary.dump(2) + "\n");
  res.files.push_back(summary.string());
  return res;
}

inline RunResult run_capacity_sweep(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output);
  const auto pts = detail::grid_points(cfg);
  const std::size_t np = cfg.policies.size();
  auto rows = parallel_map<std::string>(pts.size() * np, cfg.threads, [&](std::size_t i) {
    const auto& pt = pts[i / np];
    const std::string& pname = cfg.policies[i % np];
    const InputSpec& in = cfg.inputs[pt.input];
    const QosParams q{pt.theta, cfg.tb};
    const PowerPolicy p = detail::make_policy(parse_policy_kind(pname), cfg, in.constellation, q,
                                              from_db(pt.snr_db), cfg.solver);
    std::ostringstream os;
    os << format_double(pt.theta) << ',' << format_double(pt.snr_db) << ',' << in.label << ',' << pname << ','
       << format_double(detail::throughput(p, q, in.constellation)) << ',' << format_double(average_snr(p)) << '\n';
    return os.str();
  });
  std::string text = detail::metadata_line(cfg) + "theta,snr_db,constellation,policy,capacity,avg_snr\n";
  for (const auto& r : rows) text += r;
  const fs::path file = fs::path(cfg.output) / "capacity.csv";
  detail::write_text(file, text);
  RunResult res;
  res.summary = {{"command", "capacity-sweep"}, {"rows", rows.size()}, {"file", file.string()}};
  res.files.push_back(file.string());
  return res;
}

// Constant-power capacity against Eb/N0 with the linear low-power model.
inline RunResult run_lowpower(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output);
  const auto pts = detail::grid_points(cfg);
  auto rows = parallel_map<std::string>(pts.size(), cfg.threads, [&](std::size_t i) {
    const auto& pt = pts[i];
    const InputSpec& in = cfg.inputs[pt.input];
    const QosParams q{pt.theta, cfg.tb};
    const double snr = from_db(pt.snr_db);
    const PowerPolicy p = constant_power_policy(*cfg.fading, snr, cfg.solver.grid_points);
    const double cap = detail::throughput(p, q, in.constellation);
    const double eb_db = to_db(eb_n0_of(snr, cap));
    std::ostringstream os;
    os << in.label << ',' << format_double(pt.theta) << ',' << format_double(pt.snr_db) << ','
       << format_double(eb_db) << ',' << format_double(cap) << ','
       << format_double(capacity_linear_approx(*cfg.fading, in.constellation, q, eb_db)) << '\n';
    return os.str();
  });
  std::string text = detail::metadata_line(cfg) + "constellation,theta,snr_db,eb_n0_db,capacity,capacity_linear\n";
  for (const auto& r : rows) text += r;
  const fs::path file = fs::path(cfg.output) / "lowpower.csv";
  detail::write_text(file, text);

  json metrics = json::array();
  for (const auto& in : cfg.inputs) {
    for (double t : cfg.theta) {
      const LowPowerMetrics m = low_power_metrics(*cfg.fading, in.constellation, QosParams{t, cfg.tb});
      metrics.push_back({{"constellation", in.label},
                         {"eb_n0_min_db", m.eb_n0_min_db},
                         {"s0", m.s0},
                         {"curvature", m.curvature},
                         {"theta", t},
                         {"fading", cfg.fading_echo}});
    }
  }
  const fs::path mfile = fs::path(cfg.output) / "lowpower_metrics.json";
  detail::write_text(mfile, metrics.dump(2) + "\n");
  RunResult res;
  res.summary = {{"command", "lowpower"}, {"metrics", metrics}, {"file", file.string()}};
  res.files = {file.string(), mfile.string()};
  return res;
}

// C_E against the EE requirement, given as a percentage of the maximum EE
// achievable within the average-power cap.
inline RunResult run_ee_tradeoff(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output);
  const auto pts = detail::grid_points(cfg);
  auto rows = parallel_map<std::string>(pts.size(), cfg.threads, [&](std::size_t i) {
    const auto& pt = pts[i];
    const InputSpec& in = cfg.inputs[pt.input];
    const QosParams q{pt.theta, cfg.tb};
    const double cap = from_db(pt.snr_db);
    EeParams ee = cfg.ee->params;
    const EeOptimum best = max_achievable_ee(*cfg.fading, q, in.constellation, ee, cap, cfg.solver);
    std::ostringstream os;
    for (double pct : cfg.ee->gain_pct) {
      ee.ee_min = pct / 100.0 * best.ee;
      const EeSolution s = solve_policy_ee(*cfg.fading, q, in.constellation, ee, cap, cfg.solver);
      const double c = effective_capacity(s.policy, q, in.constellation);
      const double avg = average_snr(s.policy);
      os << in.label << ',' << format_double(pt.theta) << ',' << format_double(pt.snr_db) << ','
         << format_double(pct) << ',' << format_double(ee.ee_min) << ',' << to_string(s.binding) << ','
         << format_double(c) << ',' << format_double(avg) << ','
         << format_double(s.binding == Binding::Infeasible ? 0.0 : achieved_ee(s.policy, q, in.constellation, ee))
         << '\n';
    }
    return os.str();
  });
  std::string text = detail::metadata_line(cfg) +
                     "constellation,theta,snr_db,ee_gain_pct,ee_min,status,capacity,avg_snr,achieved_ee\n";
  for (const auto& r : rows) text += r;
  const fs::path file = fs::path(cfg.output) / "ee_tradeoff.csv";
  detail::write_text(file, text);
  RunResult res;
  res.summary = {{"command", "ee-tradeoff"}, {"file", file.string()}};
  res.files.push_back(file.string());
  return res;
}

inline RunResult run(const ExperimentConfig& cfg) {
  switch (cfg.command) {
    case Command::Solve:
      return run_solve(cfg);
    case Command::CapacitySweep:
      return run_capacity_sweep(cfg);
    case Command::LowPower:
      return run_lowpower(cfg);
    case Command::EeTradeoff:
      return run_ee_tradeoff(cfg);
  }
  throw ConfigError("unknown command");
}

}  // namespace effcap::cli
