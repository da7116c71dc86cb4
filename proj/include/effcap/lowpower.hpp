// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The effcap Authors
#pragma once

#include <cmath>
#include <string>

#include "effcap/capacity.hpp"
#include "effcap/constellation.hpp"
#include "effcap/detail/numeric.hpp"
#include "effcap/error.hpp"
#include "effcap/fading.hpp"
#include "effcap/solver.hpp"
#include "effcap/special.hpp"

namespace effcap {

struct LowPowerMetrics {
  double eb_n0_min = 0.0;
  double eb_n0_min_db = 0.0;
  double s0 = 0.0;
  double curvature = 0.0;  // I''(0) in bits
};

inline double to_db(double x) { return 10.0 * std::log10(x); }

// ln 2 / E{z}, for any input and any theta.
inline double min_energy_per_bit(const FadingModel& f) {
  const double mean = f.moments().mean;
  if (!(mean > 0.0) || !std::isfinite(mean)) throw DomainError("min_energy_per_bit requires finite E{z} > 0");
  return detail::kLn2 / mean;
}

namespace detail {

// -I''(0) ln 2: 1 for proper-complex and Gaussian inputs, 2 for real ones.
inline double curvature_nats(const Constellation& c) { return -mi_second_derivative_at_zero(c) * kLn2; }

inline double slope_from_ratio(double ratio, double k, double beta) {
  return 2.0 / ((k + beta) * ratio - beta);
}

}  // namespace detail

// Wideband slope from E{z^2}/E{z}^2, the input curvature and beta.
inline double wideband_slope(const FadingModel& f, const Constellation& c, const QosParams& q) {
  q.validate();
  const Moments mo = f.moments();
  if (!std::isfinite(mo.second) || !(mo.mean > 0.0)) throw DomainError("wideband_slope requires finite moments");
  return detail::slope_from_ratio(mo.second / (mo.mean * mo.mean), detail::curvature_nats(c), q.beta());
}

inline double wideband_slope_nakagami(double m, const Constellation& c, const QosParams& q) {
  return 2.0 / ((1.0 + 1.0 / m) * detail::curvature_nats(c) + q.beta() / m);
}

inline double wideband_slope_rician(double k, const Constellation& c, const QosParams& q) {
  const double ratio = (2.0 + 4.0 * k + k * k) / ((k + 1.0) * (k + 1.0));
  return detail::slope_from_ratio(ratio, detail::curvature_nats(c), q.beta());
}

inline LowPowerMetrics low_power_metrics(const FadingModel& f, const Constellation& c, const QosParams& q) {
  LowPowerMetrics m;
  m.eb_n0_min = min_energy_per_bit(f);
  m.eb_n0_min_db = to_db(m.eb_n0_min);
  m.s0 = wideband_slope(f, c, q);
  m.curvature = mi_second_derivative_at_zero(c);
  return m;
}

// Linear throughput model in Eb/N0 (dB) around the minimum energy per bit.
inline double capacity_linear_approx(const FadingModel& f, const Constellation& c, const QosParams& q,
                                     double eb_n0_db) {
  const double offset = eb_n0_db - to_db(min_energy_per_bit(f));
  return std::max(0.0, wideband_slope(f, c, q) / (10.0 * std::log10(2.0)) * offset);
}

// Eb/N0 of a constant-power operating point: SNR / C_E with C_E in bits.
inline double eb_n0_of(double snr, double capacity_bits) { return snr / capacity_bits; }

// First-order power law mu = (z - alpha) / ((beta + |I''(0)| ln 2) z^2).
inline double low_power_mu(double z, double alpha, double denom) {
  return z > alpha ? (z - alpha) / (denom * z * z) : 0.0;
}

inline double low_power_denominator(const Constellation& c, const QosParams& q) {
  return q.beta() + detail::curvature_nats(c);
}

inline PowerPolicy low_power_policy_for_cutoff(const FadingModel& f, double alpha, double denom, int points) {
  PowerPolicy p;
  p.grid = f.policy_grid(alpha, points);
  p.alpha = alpha;
  p.label = "low_power";
  p.mu.reserve(p.grid.size());
  for (double z : p.grid.nodes) p.mu.push_back(low_power_mu(z, alpha, denom));
  return p;
}

// Low-power policy with alpha bisected (in ln alpha) on the power constraint.
inline PowerPolicy low_power_policy(const FadingModel& f, const Constellation& c, const QosParams& q, double snr,
                                    const SolverConfig& cfg = {}) {
  q.validate();
  if (!(snr > 0.0) || !std::isfinite(snr)) throw DomainError("low_power_policy requires snr > 0");
  const double denom = low_power_denominator(c, q);
  auto excess = [&](double u) {
    return average_snr(low_power_policy_for_cutoff(f, std::exp(u), denom, cfg.grid_points)) - snr;
  };
  double lo = 0.0;
  double hi = 0.0;
  double flo = excess(lo);
  double fhi = flo;
  for (int k = 0; flo <= 0.0 || fhi >= 0.0; ++k) {
    if (k > 2000) throw IterationLimitError("low_power_policy: bracket search failed", std::exp(lo), flo);
    if (flo <= 0.0) {
      hi = lo;
      fhi = flo;
      lo -= 1.0;
      flo = excess(lo);
    } else {
      lo = hi;
      flo = fhi;
      hi += 1.0;
      fhi = excess(hi);
    }
  }
  for (int it = 0; it < cfg.max_outer; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = excess(mid);
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(mid)) || std::abs(fm) <= cfg.polish_rel_tol * snr) {
      return low_power_policy_for_cutoff(f, std::exp(mid), denom, cfg.grid_points);
    }
    if (fm > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw IterationLimitError("low_power_policy: bisection did not converge", std::exp(0.5 * (lo + hi)), hi - lo);
}

// E{mu} of the low-power policy under Nakagami-m fading, times the
// denominator: [m Omega Gamma(m-1, x) - m^2 alpha Gamma(m-2, x)] / (Omega^2 Gamma(m)),
// x = m alpha / Omega.
inline double nakagami_low_power_moment(double m, double omega, double alpha) {
  const double x = m * alpha / omega;
  return (m * omega * special::upper_incomplete_gamma(m - 1.0, x) -
          m * m * alpha * special::upper_incomplete_gamma(m - 2.0, x)) /
         (omega * omega * std::tgamma(m));
}

// Cutoff solving the Nakagami closed-form constraint for the low-power policy.
inline double nakagami_low_power_alpha(double m, double omega, const Constellation& c, const QosParams& q,
                                       double snr) {
  if (!(m >= 0.5) || !(omega > 0.0)) throw ConfigError("Nakagami parameters require m >= 0.5, omega > 0");
  if (!(snr > 0.0)) throw DomainError("nakagami_low_power_alpha requires snr > 0");
  const double target = low_power_denominator(c, q) * snr;
  // The moment decreases from E{1/z} (possibly infinite) to 0 as alpha grows.
  auto excess = [&](double u) { return nakagami_low_power_moment(m, omega, std::exp(u)) - target; };
  double lo = std::log(omega);
  double hi = lo;
  for (int k = 0; excess(lo) <= 0.0; ++k) {
    if (k > 800) throw DomainError("nakagami_low_power_alpha: snr exceeds the policy's reach");
    lo -= 1.0;
  }
  for (int k = 0; excess(hi) >= 0.0; ++k) {
    if (k > 800) throw NumericalError("nakagami_low_power_alpha: bracket search failed");
    hi += 1.0;
  }
  for (int it = 0; it < 400 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (excess(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

}  // namespace effcap
