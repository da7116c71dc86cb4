// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The effcap Authors
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "effcap/constellation.hpp"
#include "effcap/detail/numeric.hpp"
#include "effcap/error.hpp"
#include "effcap/fading.hpp"

namespace effcap {

// QoS exponent theta (1/bit) and frame-duration x bandwidth product TB.
struct QosParams {
  double theta = 0.0;
  double tb = 1.0;

  double theta_tb() const { return theta * tb; }
  double beta() const { return theta * tb * detail::kLog2e; }

  void validate() const {
    if (!(theta >= 0.0) || !std::isfinite(theta)) throw ConfigError("theta must be finite and >= 0");
    if (!(tb > 0.0) || !std::isfinite(tb)) throw ConfigError("tb must be finite and > 0");
  }
};

// Normalized transmit power mu(z) tabulated on a gain grid. Nodes at or
// below the cutoff alpha carry zero power.
struct PowerPolicy {
  GainGrid grid;
  std::vector<double> mu;
  double alpha = 0.0;
  std::string label;

  std::size_t size() const { return mu.size(); }

  void validate() const {
    grid.validate();
    if (mu.size() != grid.size()) throw ConfigError("policy: mu and grid sizes differ");
    if (!(alpha >= 0.0)) throw ConfigError("policy: alpha must be >= 0");
    for (std::size_t i = 0; i < mu.size(); ++i) {
      if (!(mu[i] >= 0.0) || !std::isfinite(mu[i])) throw ConfigError("policy: mu must be finite and >= 0");
      if (grid.nodes[i] <= alpha && mu[i] != 0.0) throw ConfigError("policy: nonzero power below cutoff");
    }
  }
};

// Off-grid evaluation of a policy: monotone cubic in ln z for the received
// SNR mu(z) z, anchored at zero on the cutoff and flat beyond the last node.
class PolicyInterpolant {
 public:
  explicit PolicyInterpolant(const PowerPolicy& p) : alpha_(p.alpha) {
    std::vector<double> x;
    std::vector<double> y;
    if (alpha_ > 0.0) {
      x.push_back(std::log(alpha_));
      y.push_back(0.0);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double z = p.grid.nodes[i];
      if (z <= alpha_) continue;
      const double u = std::log(z);
      if (!x.empty() && !(u > x.back())) continue;
      x.push_back(u);
      y.push_back(p.mu[i] * z);
    }
    if (!x.empty()) spline_ = detail::MonotoneCubic(std::move(x), std::move(y));
  }

  double operator()(double z) const {
    if (!(z > alpha_) || spline_.empty()) return 0.0;
    return std::max(0.0, spline_(std::log(z))) / z;
  }

 private:
  double alpha_;
  detail::MonotoneCubic spline_;
};

namespace detail {

inline void require_shape(const PowerPolicy& p) {
  if (p.mu.size() != p.grid.size() || p.grid.size() == 0) throw ConfigError("policy: mu and grid sizes differ");
}

}  // namespace detail

// ln E{exp(-theta TB I(mu(z) z))} by shifted log-sum-exp over the grid.
inline double log_expected_exp_neg(const PowerPolicy& p, const QosParams& q, const Constellation& c) {
  detail::require_shape(p);
  std::vector<double> x(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    x[i] = -q.theta_tb() * c.mi(p.mu[i] * p.grid.nodes[i]);
  }
  // Normalized by the total weight so that a zero-rate policy gives exactly 0.
  double total = 0.0;
  for (double w : p.grid.weights) total += w;
  return detail::log_weighted_sum_exp(p.grid.weights, x) - std::log(total);
}

// Effective capacity in bits per symbol. theta = 0 is rejected; use
// average_rate for the ergodic limit.
inline double effective_capacity(const PowerPolicy& p, const QosParams& q, const Constellation& c) {
  q.validate();
  if (q.theta == 0.0) throw ConfigError("effective_capacity requires theta > 0; use average_rate");
  return std::max(0.0, -log_expected_exp_neg(p, q, c) / q.theta_tb());
}

inline double average_rate(const PowerPolicy& p, const Constellation& c) {
  detail::require_shape(p);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p.grid.weights[i] * c.mi(p.mu[i] * p.grid.nodes[i]);
  return s;
}

inline double average_snr(const PowerPolicy& p) {
  detail::require_shape(p);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p.grid.weights[i] * p.mu[i];
  return s;
}

inline PowerPolicy constant_power_policy(const FadingModel& f, double snr, int points = 512) {
  if (!(snr >= 0.0) || !std::isfinite(snr)) throw DomainError("snr must be finite and >= 0");
  PowerPolicy p;
  p.grid = f.policy_grid(0.0, points);
  p.mu.assign(p.grid.size(), snr);
  p.label = "constant";
  return p;
}

// Same power values re-tabulated on another grid.
inline PowerPolicy resample(const PowerPolicy& p, GainGrid grid) {
  const PolicyInterpolant at(p);
  PowerPolicy out;
  out.grid = std::move(grid);
  out.alpha = p.alpha;
  out.label = p.label;
  out.mu.reserve(out.grid.size());
  for (double z : out.grid.nodes) out.mu.push_back(at(z));
  return out;
}

}  // namespace effcap
