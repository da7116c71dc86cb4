// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The effcap Authors
#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>

#include "json.hpp"

#include "effcap/capacity.hpp"
#include "effcap/error.hpp"

namespace effcap {

// CSV layout: one "# {json}" metadata line, a header row "z,mu,weight", then
// one row per grid node. Numbers are written with 17 significant digits.
struct StoredPolicy {
  PowerPolicy policy;
  nlohmann::json meta;
};

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_policy_csv(std::ostream& os, const PowerPolicy& p, nlohmann::json meta = nlohmann::json::object()) {
  meta["alpha"] = p.alpha;
  meta["label"] = p.label;
  os << "# " << meta.dump() << "\n";
  os << "z,mu,weight\n";
  for (std::size_t i = 0; i < p.size(); ++i) {
    os << format_double(p.grid.nodes[i]) << ',' << format_double(p.mu[i]) << ','
       << format_double(p.grid.weights[i]) << '\n';
  }
}

inline void save_policy_csv(const std::string& path, const PowerPolicy& p, nlohmann::json meta = nlohmann::json::object()) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  write_policy_csv(os, p, std::move(meta));
  if (!os) throw ConfigError("failed writing '" + path + "'");
}

namespace detail {

inline double parse_field(std::string_view s, std::size_t line) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("policy CSV line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

inline StoredPolicy read_policy_csv(std::istream& is) {
  StoredPolicy out;
  std::string line;
  std::size_t n = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    if (line.rfind('#', 0) == 0) {
      if (out.meta.is_null()) out.meta = nlohmann::json::parse(line.substr(1));
      continue;
    }
    if (!header) {
      if (line.rfind("z,mu,weight", 0) != 0) throw ConfigError("policy CSV: expected header 'z,mu,weight'");
      header = true;
      continue;
    }
    const std::string_view v(line);
    const auto c1 = v.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : v.find(',', c1 + 1);
    if (c2 == std::string_view::npos) throw ConfigError("policy CSV line " + std::to_string(n) + ": expected 3 fields");
    out.policy.grid.nodes.push_back(detail::parse_field(v.substr(0, c1), n));
    out.policy.mu.push_back(detail::parse_field(v.substr(c1 + 1, c2 - c1 - 1), n));
    out.policy.grid.weights.push_back(detail::parse_field(v.substr(c2 + 1), n));
  }
  if (!header) throw ConfigError("policy CSV: missing header");
  if (out.meta.is_null()) out.meta = nlohmann::json::object();
  out.policy.alpha = out.meta.value("alpha", 0.0);
  out.policy.label = out.meta.value("label", std::string{});
  out.policy.validate();
  return out;
}

inline StoredPolicy load_policy_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open policy file '" + path + "'");
  return read_policy_csv(is);
}

}  // namespace effcap
