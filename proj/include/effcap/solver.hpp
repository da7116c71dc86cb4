// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The effcap Authors
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "effcap/capacity.hpp"
#include "effcap/constellation.hpp"
#include "effcap/detail/numeric.hpp"
#include "effcap/error.hpp"
#include "effcap/fading.hpp"

namespace effcap {

struct TraceRow {
  int iteration = 0;
  double alpha = 0.0;
  double avg_snr = 0.0;
  double capacity = 0.0;
  std::string phase;
};

struct SolverConfig {
  double eps = 1e-5;    // |g| tolerance of the pointwise root
  double delta = 1e-5;  // dual stopping rule |alpha (SNR - E{mu})|
  double zeta = 0.1;    // subgradient step
  int max_inner = 10000;
  int max_outer = 100000;
  double mu_lo_init = 0.0;
  double mu_hi_init = 1.0;
  int grid_points = 512;
  double alpha_init = 1.0;
  double mu_rel_tol = 1e-13;  // bracket width of the pointwise bisection, relative
  // After `handoff` subgradient steps (or on convergence) the multiplier is
  // refined by a bracketed root-find on the power constraint.
  bool polish = true;
  int handoff = 200;
  double polish_rel_tol = 1e-12;
  int max_fixed_point = 60;
  std::function<void(const TraceRow&)> trace;

  void validate() const {
    detail::require(eps > 0.0 && delta > 0.0 && zeta > 0.0, "solver tolerances and step must be positive");
    detail::require(mu_rel_tol > 0.0 && polish_rel_tol > 0.0, "solver tolerances must be positive");
    detail::require(max_inner > 0 && max_outer > 0 && handoff > 0 && max_fixed_point > 0,
                    "solver iteration limits must be positive");
    detail::require(mu_lo_init == 0.0 && mu_hi_init > 0.0, "mu bracket seeds must satisfy 0 = lo < hi");
    detail::require(alpha_init > 0.0, "alpha_init must be positive");
    detail::require(grid_points >= 32, "grid_points must be at least 32");
  }
};

namespace detail {

// ln(e^{-theta TB I(mu z)} MMSE(mu z) z).
inline double log_g_term(double mu, double z, const QosParams& q, const Constellation& c) {
  const double rho = mu * z;
  return -q.theta_tb() * c.mi(rho) + c.log_mmse(rho) + std::log(z);
}

}  // namespace detail

inline double g_value(double mu, double z, double alpha, const QosParams& q, const Constellation& c) {
  return std::exp(detail::log_g_term(mu, z, q, c)) - alpha;
}

// Unique root in mu of g = 0, zero when z <= alpha. Bisection runs on the
// log-domain form of g.
inline double solve_pointwise_mu(double z, double alpha, const QosParams& q, const Constellation& c,
                                 const SolverConfig& cfg = {}) {
  if (!(z > 0.0)) throw DomainError("solve_pointwise_mu requires z > 0");
  if (z <= alpha) return 0.0;
  const double la = std::log(alpha);
  auto h = [&](double mu) { return detail::log_g_term(mu, z, q, c) - la; };
  double lo = cfg.mu_lo_init;
  double hi = cfg.mu_hi_init;
  while (h(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi * z > 0x1p60) throw NumericalError("solve_pointwise_mu: bracket expansion exceeded mu z = 2^60");
  }
  for (int it = 0; it < cfg.max_inner; ++it) {
    if (hi - lo <= cfg.mu_rel_tol * hi) return 0.5 * (lo + hi);
    const double mid = 0.5 * (lo + hi);
    if (h(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw IterationLimitError("solve_pointwise_mu: bisection did not converge", 0.5 * (lo + hi), hi - lo);
}

// Pointwise-optimal policy for a fixed multiplier alpha, on a grid with a
// panel edge at alpha.
inline PowerPolicy policy_for_cutoff(const FadingModel& f, double alpha, const QosParams& q,
                                     const Constellation& c, const SolverConfig& cfg = {}) {
  PowerPolicy p;
  p.grid = f.policy_grid(alpha, cfg.grid_points);
  p.alpha = alpha;
  p.label = "optimal";
  p.mu.reserve(p.grid.size());
  for (double z : p.grid.nodes) p.mu.push_back(solve_pointwise_mu(z, alpha, q, c, cfg));
  return p;
}

// Closed-form optimum for the Gaussian input: alpha^{-1/(b+1)} z^{-b/(b+1)} - 1/z.
inline double gaussian_optimal_mu(double z, double alpha, double beta) {
  if (z <= alpha) return 0.0;
  return std::pow(alpha, -1.0 / (beta + 1.0)) * std::pow(z, -beta / (beta + 1.0)) - 1.0 / z;
}

namespace detail {

// E{mu} as a function of alpha is decreasing. Refines alpha in ln alpha to
// |E{mu} - snr| <= tol * snr.
template <class Eval>
double polish_multiplier(Eval&& avg_at, double alpha, double snr, const SolverConfig& cfg) {
  double lo = std::log(alpha);
  double flo = avg_at(alpha) - snr;
  if (flo == 0.0) return alpha;
  double hi = lo;
  double fhi = flo;
  const double step = std::log(2.0);
  for (int k = 0; flo <= 0.0 || fhi >= 0.0; ++k) {
    if (k > 2000) throw IterationLimitError("multiplier bracket search failed", std::exp(lo), flo);
    if (flo <= 0.0) {
      hi = lo;
      fhi = flo;
      lo -= step;
      flo = avg_at(std::exp(lo)) - snr;
    } else {
      lo = hi;
      flo = fhi;
      hi += step;
      fhi = avg_at(std::exp(hi)) - snr;
    }
  }
  const double u = illinois_decreasing([&](double x) { return avg_at(std::exp(x)) - snr; }, lo, hi,
                                       flo, fhi, 1e-15, cfg.polish_rel_tol * snr, 400);
  return std::exp(u);
}

inline void emit(const SolverConfig& cfg, int it, double alpha, const PowerPolicy& p, double avg,
                 const QosParams& q, const Constellation& c, const char* phase) {
  if (!cfg.trace) return;
  cfg.trace({it, alpha, avg, effective_capacity(p, q, c), phase});
}

}  // namespace detail

// Optimal QoS-constrained policy at average power snr: projected subgradient
// on the multiplier alpha, with Polyak averaging once the iterates oscillate,
// followed by an optional root-find polish.
inline PowerPolicy solve_policy(const FadingModel& f, const QosParams& q, const Constellation& c,
                                double snr, const SolverConfig& cfg = {}) {
  cfg.validate();
  q.validate();
  if (!(snr > 0.0) || !std::isfinite(snr)) throw DomainError("solve_policy requires snr > 0");
  if (!(q.theta > 0.0)) throw DomainError("solve_policy requires theta > 0");
  c.warm();

  auto avg_at = [&](double a) { return average_snr(policy_for_cutoff(f, a, q, c, cfg)); };

  double alpha = cfg.alpha_init;
  double last_residual = 0.0;
  bool converged = false;
  int flips = 0;
  int prev_sign = 0;
  double avg_sum = 0.0;
  int avg_count = 0;
  for (int n = 0; n < cfg.max_outer; ++n) {
    const PowerPolicy p = policy_for_cutoff(f, alpha, q, c, cfg);
    const double avg = average_snr(p);
    last_residual = snr - avg;
    detail::emit(cfg, n, alpha, p, avg, q, c, "subgradient");
    if (std::abs(alpha * last_residual) <= cfg.delta) {
      converged = true;
      break;
    }
    if (cfg.polish && n + 1 >= cfg.handoff) break;

    const int sign = last_residual > 0.0 ? 1 : -1;
    if (prev_sign != 0 && sign != prev_sign) ++flips;
    prev_sign = sign;
    if (flips >= 2) {
      avg_sum += alpha;
      ++avg_count;
      if (avg_count % 10 == 0) {
        const double mean = avg_sum / avg_count;
        const double r = snr - avg_at(mean);
        if (std::abs(mean * r) <= cfg.delta) {
          alpha = mean;
          last_residual = r;
          converged = true;
          break;
        }
      }
    }
    const double next = alpha + cfg.zeta * (avg - snr);
    // The projection [.]^+ is kept strictly positive: alpha = 0 has no finite policy.
    alpha = next > 0.0 ? next : 0.5 * alpha;
  }

  if (cfg.polish) {
    alpha = detail::polish_multiplier(avg_at, alpha, snr, cfg);
  } else if (!converged) {
    throw IterationLimitError("solve_policy: dual iteration limit reached", alpha, last_residual);
  }
  PowerPolicy out = policy_for_cutoff(f, alpha, q, c, cfg);
  detail::emit(cfg, -1, alpha, out, average_snr(out), q, c, "final");
  return out;
}

// mu(z) = C/z with C = snr / E{1/z}; identically zero when E{1/z} is infinite.
inline PowerPolicy channel_inversion_policy(const FadingModel& f, double snr, int points = 512) {
  if (!(snr > 0.0) || !std::isfinite(snr)) throw DomainError("channel inversion requires snr > 0");
  const double inv = f.moments().inv_mean;
  const double level = std::isfinite(inv) ? snr / inv : 0.0;
  PowerPolicy p;
  p.grid = f.policy_grid(0.0, points);
  p.label = "channel_inversion";
  p.mu.reserve(p.grid.size());
  for (double z : p.grid.nodes) p.mu.push_back(level / z);
  return p;
}

// Mercury/water-filling power at water level a (the multiplier over log2 e).
inline double mercury_mu(double z, double level, const Constellation& c) {
  if (z <= level) return 0.0;
  return c.mmse_inv(level / z) / z;
}

inline PowerPolicy mercury_policy_for_level(const FadingModel& f, double level, const Constellation& c,
                                            int points = 512) {
  PowerPolicy p;
  p.grid = f.policy_grid(level, points);
  p.alpha = level;
  p.label = "mercury_waterfilling";
  p.mu.reserve(p.grid.size());
  for (double z : p.grid.nodes) p.mu.push_back(mercury_mu(z, level, c));
  return p;
}

// Vanishing-QoS limit; the level is found by bisection in ln a.
inline PowerPolicy mercury_waterfilling_policy(const FadingModel& f, const Constellation& c, double snr,
                                               const SolverConfig& cfg = {}) {
  cfg.validate();
  if (!(snr > 0.0) || !std::isfinite(snr)) throw DomainError("mercury/water-filling requires snr > 0");
  c.warm();
  auto excess = [&](double u) {
    return average_snr(mercury_policy_for_level(f, std::exp(u), c, cfg.grid_points)) - snr;
  };
  double lo = 0.0;
  double hi = 0.0;
  double flo = excess(lo);
  double fhi = flo;
  for (int k = 0; flo <= 0.0 || fhi >= 0.0; ++k) {
    if (k > 2000) throw IterationLimitError("mercury/water-filling: bracket search failed", std::exp(lo), flo);
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
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(mid))) {
      return mercury_policy_for_level(f, std::exp(mid), c, cfg.grid_points);
    }
    const double fm = excess(mid);
    if (std::abs(fm) <= cfg.polish_rel_tol * snr) {
      return mercury_policy_for_level(f, std::exp(mid), c, cfg.grid_points);
    }
    if (fm > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw IterationLimitError("mercury/water-filling: bisection did not converge", std::exp(0.5 * (lo + hi)),
                            hi - lo);
}

// ---------------------------------------------------------------------------
// Energy-efficiency constrained policy.

struct EeParams {
  double ee_min = 0.0;       // bits per joule
  double p_circuit_n = 0.0;  // circuit power, normalized like mu
  double xi = 1.0;           // amplifier efficiency
  double n0b = 1.0;          // noise power N0 B

  double kappa() const { return ee_min * n0b; }

  void validate() const {
    detail::require(ee_min >= 0.0 && std::isfinite(ee_min), "ee_min must be finite and >= 0");
    detail::require(p_circuit_n >= 0.0 && std::isfinite(p_circuit_n), "p_circuit_n must be finite and >= 0");
    detail::require(xi > 0.0 && xi <= 1.0, "xi must lie in (0, 1]");
    detail::require(n0b > 0.0 && std::isfinite(n0b), "n0b must be finite and > 0");
  }
};

enum class Binding { EeBinding, PowerBinding, Infeasible };

inline const char* to_string(Binding b) {
  switch (b) {
    case Binding::EeBinding:
      return "ee_binding";
    case Binding::PowerBinding:
      return "power_binding";
    case Binding::Infeasible:
      return "infeasible";
  }
  return "unknown";
}

struct EeSolution {
  PowerPolicy policy;
  Binding binding = Binding::PowerBinding;
  double nu = 0.0;  // multiplier of the EE constraint; +inf at the EE-limited optimum
};

inline double achieved_ee(const PowerPolicy& p, const QosParams& q, const Constellation& c, const EeParams& ee) {
  ee.validate();
  const double denom = ee.n0b * (average_snr(p) / ee.xi + ee.p_circuit_n);
  if (!(denom > 0.0)) throw DomainError("achieved_ee: zero consumed power");
  return effective_capacity(p, q, c) / denom;
}

namespace detail {

// One member of the optimal family indexed by the multiplier alpha.
struct FamilyPoint {
  PowerPolicy policy;
  double capacity = 0.0;
  double avg = 0.0;
  double log_e = 0.0;  // ln E{e^{-theta TB I}}

  double log_slope() const { return std::log(policy.alpha * kLog2e) - log_e; }
};

inline FamilyPoint family_point(const FadingModel& f, double alpha, const QosParams& q, const Constellation& c,
                                const SolverConfig& cfg) {
  FamilyPoint pt;
  pt.policy = policy_for_cutoff(f, alpha, q, c, cfg);
  pt.log_e = log_expected_exp_neg(pt.policy, q, c);
  pt.capacity = std::max(0.0, -pt.log_e / q.theta_tb());
  pt.avg = average_snr(pt.policy);
  return pt;
}

inline FamilyPoint family_point(const PowerPolicy& p, const QosParams& q, const Constellation& c) {
  FamilyPoint pt;
  pt.policy = p;
  pt.log_e = log_expected_exp_neg(p, q, c);
  pt.capacity = std::max(0.0, -pt.log_e / q.theta_tb());
  pt.avg = average_snr(p);
  return pt;
}

// Solves alpha = r (kappa / xi) E{e^{-theta TB I}}(alpha) / log2 e by damped
// iteration in ln alpha; falls back to a bracketed root of the same map.
inline FamilyPoint ee_fixed_point(const FadingModel& f, double r, double u0, const QosParams& q,
                                  const Constellation& c, const EeParams& ee, const SolverConfig& cfg) {
  const double lc = std::log(r * ee.kappa() / (ee.xi * kLog2e));
  auto residual = [&](double u, FamilyPoint& pt) {
    pt = family_point(f, std::exp(u), q, c, cfg);
    return lc + pt.log_e - u;  // decreasing in u
  };
  FamilyPoint pt;
  double u = u0;
  double res = residual(u, pt);
  for (int k = 0; k < cfg.max_fixed_point; ++k) {
    if (std::abs(res) <= 1e-13) return pt;
    u += 0.5 * res;
    res = residual(u, pt);
  }
  double lo = u;
  double hi = u;
  double flo = res;
  double fhi = res;
  FamilyPoint tmp;
  for (int k = 0; flo <= 0.0 || fhi >= 0.0; ++k) {
    if (k > 2000) throw IterationLimitError("EE fixed point: bracket search failed", std::exp(u), res);
    if (flo <= 0.0) {
      lo -= 1.0;
      flo = residual(lo, tmp);
    } else {
      hi += 1.0;
      fhi = residual(hi, tmp);
    }
  }
  const double root =
      illinois_decreasing([&](double x) { return residual(x, tmp); }, lo, hi, flo, fhi, 1e-14, 1e-13, 400);
  residual(root, pt);
  return pt;
}

inline double ee_margin(const FamilyPoint& pt, const EeParams& ee) {
  return pt.capacity - ee.kappa() * (pt.avg / ee.xi + ee.p_circuit_n);
}

}  // namespace detail

// Maximizes C_E subject to EE >= ee_min and E{mu} <= snr_cap.
//
// Along the optimal family the EE-constrained stationarity condition reads
// alpha = r (kappa/xi) E{e^{-theta TB I}} / log2 e with r = nu / (1 + nu);
// the margin C_E - kappa (E{mu}/xi + P_cn) grows with r and peaks at r = 1.
inline EeSolution solve_policy_ee(const FadingModel& f, const QosParams& q, const Constellation& c,
                                  const EeParams& ee, double snr_cap, const SolverConfig& cfg = {}) {
  ee.validate();
  if (!(snr_cap > 0.0) || !std::isfinite(snr_cap)) throw DomainError("solve_policy_ee requires snr_cap > 0");
  EeSolution sol;
  sol.policy = solve_policy(f, q, c, snr_cap, cfg);
  if (ee.kappa() == 0.0) return sol;

  const detail::FamilyPoint at_cap = detail::family_point(sol.policy, q, c);
  const double margin_cap = detail::ee_margin(at_cap, ee);
  const double r_cap = std::exp(at_cap.log_slope()) * ee.xi / ee.kappa();
  if (margin_cap >= 0.0) return sol;

  auto infeasible = [&] {
    EeSolution out;
    out.binding = Binding::Infeasible;
    out.policy = sol.policy;
    out.policy.label = "infeasible";
    std::fill(out.policy.mu.begin(), out.policy.mu.end(), 0.0);
    out.policy.alpha = 0.0;
    return out;
  };
  if (r_cap >= 1.0) return infeasible();

  const double u_cap = std::log(at_cap.policy.alpha);
  detail::FamilyPoint top = detail::ee_fixed_point(f, 1.0, u_cap, q, c, ee, cfg);
  const double margin_top = detail::ee_margin(top, ee);
  // Slack for round-off when ee_min equals the maximum achievable EE exactly.
  if (margin_top < -1e-10 * std::max(top.capacity, 1e-300)) return infeasible();

  double lo = r_cap;
  double hi = 1.0;
  detail::FamilyPoint best = top;
  double u = std::log(top.policy.alpha);
  if (margin_top > 0.0) {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      detail::FamilyPoint pt = detail::ee_fixed_point(f, mid, u, q, c, ee, cfg);
      const double m = detail::ee_margin(pt, ee);
      u = std::log(pt.policy.alpha);
      if (m >= 0.0) {
        hi = mid;
        best = std::move(pt);
        if (m <= 1e-12 * best.capacity) break;
      } else {
        lo = mid;
      }
      if (hi - lo <= 1e-15) break;
    }
    sol.nu = hi / (1.0 - hi);
  } else {
    sol.nu = detail::kInf;
  }
  sol.binding = Binding::EeBinding;
  sol.policy = std::move(best.policy);
  sol.policy.label = "ee_constrained";
  return sol;
}

struct EeOptimum {
  double ee = 0.0;
  double snr = 0.0;
  PowerPolicy policy;
};

// Largest EE over optimal policies with E{mu} <= snr_cap. Stationarity of
// C_E / (E{mu}/xi + P_cn) along the optimal family is
// s (E{mu}/xi + P_cn) = C_E / xi with s = dC_E/dSNR = alpha log2 e / E{e^{-theta TB I}}.
inline EeOptimum max_achievable_ee(const FadingModel& f, const QosParams& q, const Constellation& c,
                                   const EeParams& ee, double snr_cap, const SolverConfig& cfg = {}) {
  ee.validate();
  if (!(ee.p_circuit_n > 0.0)) throw ConfigError("max_achievable_ee requires p_circuit_n > 0");
  auto stationarity = [&](const detail::FamilyPoint& pt) {
    return std::exp(pt.log_slope()) * (pt.avg / ee.xi + ee.p_circuit_n) - pt.capacity / ee.xi;
  };
  auto finish = [&](detail::FamilyPoint pt) {
    EeOptimum out;
    out.snr = pt.avg;
    out.ee = pt.capacity / (ee.n0b * (pt.avg / ee.xi + ee.p_circuit_n));
    out.policy = std::move(pt.policy);
    return out;
  };
  detail::FamilyPoint at_cap = detail::family_point(solve_policy(f, q, c, snr_cap, cfg), q, c);
  double flo = stationarity(at_cap);
  if (flo >= 0.0) return finish(std::move(at_cap));

  // Stationarity is negative at the cap and positive as E{mu} -> 0.
  double lo = std::log(at_cap.policy.alpha);
  double hi = lo;
  double fhi = flo;
  detail::FamilyPoint pt;
  for (int k = 0; fhi <= 0.0; ++k) {
    if (k > 2000) throw IterationLimitError("max_achievable_ee: bracket search failed", std::exp(hi), fhi);
    lo = hi;
    flo = fhi;
    hi += 0.5;
    pt = detail::family_point(f, std::exp(hi), q, c, cfg);
    fhi = pt.avg > 0.0 ? stationarity(pt) : 1.0;
  }
  // stationarity increases with ln alpha; negate for the decreasing solver.
  auto neg = [&](double u) {
    const detail::FamilyPoint p = detail::family_point(f, std::exp(u), q, c, cfg);
    return p.avg > 0.0 ? -stationarity(p) : -1.0;
  };
  const double root = detail::illinois_decreasing(neg, lo, hi, -flo, -fhi, 1e-14, 0.0, 400);
  return finish(detail::family_point(f, std::exp(root), q, c, cfg));
}

}  // namespace effcap
