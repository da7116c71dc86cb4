// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The effcap Authors
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "effcap/detail/numeric.hpp"
#include "effcap/error.hpp"
#include "effcap/quadrature.hpp"
#include "effcap/special.hpp"

namespace effcap {

struct Moments {
  double mean = 0.0;
  double second = 0.0;
  double inv_mean = 0.0;  // may be +inf
};

// Discrete probability measure on channel power gains.
struct GainGrid {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }

  template <class F>
  double expect(F f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
    return s;
  }

  void validate() const {
    if (nodes.empty() || nodes.size() != weights.size()) throw ConfigError("GainGrid: malformed");
    double total = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!(nodes[i] > 0.0) || !std::isfinite(nodes[i])) throw ConfigError("GainGrid: nodes must be positive");
      if (i > 0 && !(nodes[i] > nodes[i - 1])) throw ConfigError("GainGrid: nodes must ascend strictly");
      if (!(weights[i] >= 0.0)) throw ConfigError("GainGrid: weights must be nonnegative");
      total += weights[i];
    }
    if (std::abs(total - 1.0) > 1e-8) throw ConfigError("GainGrid: weights must sum to one");
  }
};

enum class FadingKind { Nakagami, Rician, Empirical };

namespace detail {

inline constexpr double kGridTail = 1e-17;  // probability left outside policy grids
inline constexpr int kPanelOrder = 8;       // Gauss-Legendre nodes per panel

struct FadingState {
  FadingKind kind = FadingKind::Nakagami;
  double m = 1.0;
  double omega = 1.0;
  double k = 0.0;
  std::vector<double> samples;
  GainGrid sample_grid;
  double z_lo = 0.0;
  double z_hi = 0.0;
  std::vector<double> quantile_edges;  // ln z at p = j/16
  std::once_flag range_once;
};

}  // namespace detail

// Distribution of the channel power gain z.
class FadingModel {
 public:
  static FadingModel nakagami(double m, double omega = 1.0) {
    if (!(m >= 0.5) || !std::isfinite(m)) throw ConfigError("Nakagami m must be at least 0.5");
    if (!(omega > 0.0) || !std::isfinite(omega)) throw ConfigError("Nakagami omega must be positive");
    auto st = std::make_shared<detail::FadingState>();
    st->kind = FadingKind::Nakagami;
    st->m = m;
    st->omega = omega;
    return FadingModel(std::move(st));
  }

  static FadingModel rayleigh(double omega = 1.0) { return nakagami(1.0, omega); }

  static FadingModel rician(double k, double omega = 1.0) {
    if (!(k >= 0.0) || !std::isfinite(k)) throw ConfigError("Rician K must be nonnegative");
    if (!(omega > 0.0) || !std::isfinite(omega)) throw ConfigError("Rician omega must be positive");
    auto st = std::make_shared<detail::FadingState>();
    st->kind = FadingKind::Rician;
    st->k = k;
    st->omega = omega;
    return FadingModel(std::move(st));
  }

  static FadingModel empirical(std::vector<double> samples) {
    if (samples.empty()) throw ConfigError("empirical fading needs at least one sample");
    for (double z : samples) {
      if (!(z > 0.0) || !std::isfinite(z)) throw ConfigError("empirical gains must be positive");
    }
    auto st = std::make_shared<detail::FadingState>();
    st->kind = FadingKind::Empirical;
    std::map<double, std::size_t> counts;
    for (double z : samples) ++counts[z];
    for (const auto& [z, c] : counts) {
      st->sample_grid.nodes.push_back(z);
      st->sample_grid.weights.push_back(static_cast<double>(c) / static_cast<double>(samples.size()));
    }
    st->samples = std::move(samples);
    return FadingModel(std::move(st));
  }

  FadingKind kind() const { return st_->kind; }
  double m() const { return st_->m; }
  double omega() const { return st_->omega; }
  double k() const { return st_->k; }
  const std::vector<double>& samples() const { return st_->samples; }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind()) {
      case FadingKind::Nakagami:
        os << "nakagami(m=" << m() << ", omega=" << omega() << ")";
        break;
      case FadingKind::Rician:
        os << "rician(K=" << k() << ", omega=" << omega() << ")";
        break;
      case FadingKind::Empirical:
        os << "empirical(n=" << samples().size() << ")";
        break;
    }
    return os.str();
  }

  double log_pdf(double z) const {
    require_density();
    if (z < 0.0) return -detail::kInf;
    const double w = omega();
    if (kind() == FadingKind::Nakagami) {
      const double mm = m();
      if (z == 0.0) {
        if (mm < 1.0) return detail::kInf;
        if (mm > 1.0) return -detail::kInf;
        return std::log(1.0 / w);
      }
      return (mm - 1.0) * std::log(z) + mm * std::log(mm / w) - mm * z / w - std::lgamma(mm);
    }
    const double kk = k();
    const double x = 2.0 * std::sqrt(kk * (kk + 1.0) * z / w);
    return std::log((1.0 + kk) / w) - kk - (kk + 1.0) * z / w + x +
           std::log(special::bessel_i0_scaled(x));
  }

  double pdf(double z) const { return std::exp(log_pdf(z)); }

  double cdf(double z) const {
    if (z <= 0.0) return 0.0;
    switch (kind()) {
      case FadingKind::Nakagami:
        return special::gamma_p(m(), m() * z / omega());
      case FadingKind::Rician:
        if (z <= omega()) return rician_lower(z);
        return 1.0 - rician_upper(z);
      case FadingKind::Empirical:
        break;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < st_->sample_grid.size() && st_->sample_grid.nodes[i] <= z; ++i) {
      s += st_->sample_grid.weights[i];
    }
    return s;
  }

  // Survival function P(Z > z), accurate in the upper tail.
  double sf(double z) const {
    if (z <= 0.0) return 1.0;
    switch (kind()) {
      case FadingKind::Nakagami:
        return special::gamma_q(m(), m() * z / omega());
      case FadingKind::Rician:
        if (z > omega()) return rician_upper(z);
        return 1.0 - rician_lower(z);
      case FadingKind::Empirical:
        break;
    }
    return 1.0 - cdf(z);
  }

  double quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile requires p in (0, 1)");
    if (kind() == FadingKind::Empirical) {
      const auto& g = st_->sample_grid;
      double s = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        s += g.weights[i];
        if (s >= p) return g.nodes[i];
      }
      return g.nodes.back();
    }
    return p > 0.5 ? invert(1.0 - p, true) : invert(p, false);
  }

  // Inverse survival function: z with P(Z > z) = s.
  double isf(double s) const {
    if (!(s > 0.0 && s < 1.0)) throw DomainError("isf requires s in (0, 1)");
    if (kind() == FadingKind::Empirical) return quantile(1.0 - s);
    return s < 0.5 ? invert(s, true) : invert(1.0 - s, false);
  }

  Moments moments() const {
    const double w = omega();
    switch (kind()) {
      case FadingKind::Nakagami: {
        const double mm = m();
        return {w, w * w * (1.0 + 1.0 / mm), mm > 1.0 ? mm / (w * (mm - 1.0)) : detail::kInf};
      }
      case FadingKind::Rician: {
        const double kk = k();
        return {w, (2.0 + 4.0 * kk + kk * kk) * w * w / ((kk + 1.0) * (kk + 1.0)), detail::kInf};
      }
      case FadingKind::Empirical:
        break;
    }
    const auto& g = st_->sample_grid;
    return {g.expect([](double z) { return z; }), g.expect([](double z) { return z * z; }),
            g.expect([](double z) { return 1.0 / z; })};
  }

  // Gauss-Laguerre expectation grid (unique samples for the empirical kind).
  GainGrid expectation_grid(int n = 128) const {
    if (n < 8) throw ConfigError("expectation grid needs at least 8 nodes");
    if (kind() == FadingKind::Empirical) return st_->sample_grid;
    GainGrid g;
    if (kind() == FadingKind::Nakagami) {
      const quad::Rule r = quad::gauss_laguerre(n, m() - 1.0);
      for (std::size_t i = 0; i < r.size(); ++i) {
        g.nodes.push_back(omega() * r.nodes[i] / m());
        g.weights.push_back(r.weights[i]);
      }
    } else {
      const quad::Rule r = quad::gauss_laguerre(n, 0.0);
      const double kk = k();
      for (std::size_t i = 0; i < r.size(); ++i) {
        const double x = 2.0 * std::sqrt(kk * r.nodes[i]);
        g.nodes.push_back(omega() * r.nodes[i] / (kk + 1.0));
        g.weights.push_back(r.weights[i] * special::bessel_i0_scaled(x) * std::exp(x - kk));
      }
    }
    normalize(g.weights, 1.0);
    return g;
  }

  // Grid adapted to a power cutoff alpha: composite Gauss-Legendre panels in
  // ln z with a panel edge at alpha, so a policy that vanishes below alpha is
  // integrated without a kink inside any panel. Probability below alpha is
  // matched exactly; alpha = 0 gives a cutoff-free grid.
  GainGrid policy_grid(double alpha, int points = 512) const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw DomainError("policy grid cutoff must be finite and >= 0");
    if (points < 4 * detail::kPanelOrder) throw ConfigError("policy grid needs at least 32 points");
    if (kind() == FadingKind::Empirical) return st_->sample_grid;
    ensure_range();
    const int panels = points / detail::kPanelOrder;
    const double u_lo = std::log(st_->z_lo);
    const double u_hi = std::log(st_->z_hi);
    GainGrid g;
    if (alpha >= st_->z_hi) {
      add_panels(g, uniform_edges(u_lo, u_hi, panels), 1.0);
      return g;
    }
    if (alpha > st_->z_lo) {
      const double ua = std::log(alpha);
      const int below = std::max(1, panels / 8);
      add_panels(g, uniform_edges(u_lo, ua, below), cdf(alpha));
      add_panels(g, mixed_edges(ua, u_hi, panels - below), sf(alpha));
      return g;
    }
    double ua = u_lo;
    if (alpha > 0.0) {
      const double below = cdf(alpha);
      if (below > 0.0) {
        g.nodes.push_back(alpha);
        g.weights.push_back(below);
      }
      ua = std::log(alpha);
    }
    add_panels(g, mixed_edges(ua, u_hi, panels), alpha > 0.0 ? sf(alpha) : 1.0);
    return g;
  }

 private:
  explicit FadingModel(std::shared_ptr<detail::FadingState> st) : st_(std::move(st)) {}

  // Bisection in ln z on the lower (cdf = p) or upper (sf = p) tail.
  double invert(double p, bool upper) const {
    double lo = std::log(omega()) - 800.0;
    double hi = std::log(omega()) + 8.0;
    while (sf(std::exp(hi)) > (upper ? p : 1.0 - p) && hi < std::log(omega()) + 700.0) hi += 8.0;
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double z = std::exp(mid);
      const bool below = upper ? sf(z) > p : cdf(z) < p;
      if (below) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return std::exp(0.5 * (lo + hi));
  }

  void require_density() const {
    if (kind() == FadingKind::Empirical) {
      throw ConfigError("empirical fading has no density; expectations use the samples directly");
    }
  }

  double rician_lower(double z) const {
    return quad::integrate_scalar([&](double x) { return pdf(x); }, 0.0, z);
  }

  double rician_upper(double z) const {
    return quad::integrate_to_infinity([&](double x) { return pdf(x); }, z);
  }

  // Tail quantiles and the 1/16 quantiles are computed once per model.
  void ensure_range() const {
    std::call_once(st_->range_once, [&] {
      st_->z_lo = quantile(detail::kGridTail);
      st_->z_hi = isf(detail::kGridTail);
      for (int j = 1; j < 16; ++j) st_->quantile_edges.push_back(std::log(quantile(j / 16.0)));
    });
  }

  static std::vector<double> uniform_edges(double a, double b, int panels) {
    std::vector<double> e;
    for (int i = 0; i <= panels; ++i) e.push_back(a + (b - a) * i / panels);
    e.back() = b;
    return e;
  }

  // Uniform edges in ln z merged with the interior 1/16 quantiles, so the
  // bulk of the probability is resolved even when the range is wide.
  std::vector<double> mixed_edges(double a, double b, int panels) const {
    std::vector<double> q;
    for (double x : st_->quantile_edges) {
      if (x > a && x < b) q.push_back(x);
    }
    const int uniform = std::max(panels / 2, panels - static_cast<int>(q.size()));
    std::vector<double> e = uniform_edges(a, b, uniform);
    e.insert(e.end(), q.begin(), q.end());
    std::sort(e.begin(), e.end());
    const double min_gap = 0.25 * (b - a) / uniform;
    std::vector<double> out{e.front()};
    for (std::size_t i = 1; i + 1 < e.size(); ++i) {
      if (e[i] - out.back() >= min_gap && b - e[i] >= min_gap) out.push_back(e[i]);
    }
    out.push_back(b);
    return out;
  }

  void add_panels(GainGrid& g, const std::vector<double>& edges, double mass) const {
    static const quad::Rule gl = quad::gauss_legendre(detail::kPanelOrder);
    const std::size_t first = g.weights.size();
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
      const double c = 0.5 * (edges[p] + edges[p + 1]);
      const double h = 0.5 * (edges[p + 1] - edges[p]);
      for (std::size_t i = 0; i < gl.size(); ++i) {
        const double u = c + h * gl.nodes[i];
        const double z = std::exp(u);
        g.nodes.push_back(z);
        g.weights.push_back(h * gl.weights[i] * std::exp(log_pdf(z) + u));
      }
    }
    std::vector<double> tail(g.weights.begin() + static_cast<std::ptrdiff_t>(first), g.weights.end());
    normalize(tail, mass);
    std::copy(tail.begin(), tail.end(), g.weights.begin() + static_cast<std::ptrdiff_t>(first));
  }

  static void normalize(std::vector<double>& w, double mass) {
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    if (s > 0.0) {
      for (double& x : w) x *= mass / s;
    }
  }

  std::shared_ptr<detail::FadingState> st_;
};

}  // namespace effcap
