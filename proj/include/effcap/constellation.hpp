// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The effcap Authors
#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "effcap/detail/numeric.hpp"
#include "effcap/error.hpp"
#include "effcap/quadrature.hpp"

namespace effcap {

// Integration settings for mutual information and MMSE.
//
// Real-valued inputs (and the real components of QPSK and 16-QAM) are
// integrated with adaptive Gauss-Kronrod split at the decision boundaries,
// to relative tolerance `rel_tol`. General complex point sets use a
// Gauss-Hermite product rule with `nodes_per_dim` nodes per dimension.
struct QuadratureSpec {
  int nodes_per_dim = 48;
  double rel_tol = 1e-13;

  void validate() const {
    detail::require(nodes_per_dim >= 2, "QuadratureSpec: nodes_per_dim must be at least 2");
    detail::require(rel_tol > 0.0 && rel_tol < 1e-2, "QuadratureSpec: rel_tol must lie in (0, 1e-2)");
  }

  quad::Rule hermite_rule() const {
    validate();
    return quad::gauss_hermite(nodes_per_dim);
  }
};

enum class InputKind { Discrete, Gaussian };

enum class CurvatureClass { Gaussian, ProperComplex, RealValued, Unclassified };

// Mutual information (bits), MMSE and dMMSE/drho at one SNR.
struct InfoValues {
  double mi_bits = 0.0;
  double mmse = 1.0;
  double dmmse = -1.0;
};

namespace detail {

enum class Route { Gaussian, Real, Product, Complex };

struct InfoTable {
  double rho_min = 0.0;
  double rho_max = 0.0;
  double mmse0 = 1.0;
  double dmmse0 = -1.0;
  double mi_max = 0.0;
  double tail_slope = 0.0;  // d ln MMSE / d rho beyond rho_max
  UniformHermite mi;        // bits versus ln rho
  UniformHermite log_mmse;  // ln MMSE versus ln rho
};

struct ConstellationState {
  std::string name;
  Route route = Route::Gaussian;
  std::vector<std::complex<double>> points;
  std::vector<double> real_points;
  bool antipodal = false;
  std::shared_ptr<const ConstellationState> component;
  std::optional<double> curvature_override;

  mutable std::once_flag table_once;
  mutable std::unique_ptr<InfoTable> table;
};

inline constexpr double kNoiseSpan = 27.0;  // e^{-t^2} underflows beyond

// Posterior statistics for real inputs; `sk` is the transmitted point.
// Logits are relative to the transmitted point, lse includes it (L = 0).
struct RealKernel {
  const std::vector<double>& pts;
  double sk;
  double rho;
  double sqrt_rho;
  mutable std::vector<double> logit;

  std::array<double, 3> operator()(double t) const {
    const double wgt = std::exp(-t * t) / std::sqrt(std::numbers::pi);
    if (wgt == 0.0) return {0.0, 0.0, 0.0};
    double m = -kInf;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const double d = sk - pts[j];
      logit[j] = -rho * d * d - 2.0 * sqrt_rho * d * t;
      m = std::max(m, logit[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      logit[j] = std::exp(logit[j] - m);
      z += logit[j];
    }
    double err = 0.0;  // s - shat
    double shat = 0.0;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const double qj = logit[j] / z;
      logit[j] = qj;
      err += qj * (sk - pts[j]);
      shat += qj * pts[j];
    }
    double var = 0.0;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const double d = pts[j] - shat;
      var += logit[j] * d * d;
    }
    const double lse = m + std::log(z);
    return {wgt * lse, wgt * err * err, wgt * var * var};
  }
};

// Antipodal +/-1 kernel with the transmitted symbol +1; by symmetry this is
// the full average. MMSE uses the tanh form 1 - tanh(x) = 2 / (1 + e^{2x}).
struct AntipodalKernel {
  double sqrt_rho;

  std::array<double, 3> operator()(double t) const {
    const double wgt = std::exp(-t * t) / std::sqrt(std::numbers::pi);
    if (wgt == 0.0) return {0.0, 0.0, 0.0};
    const double x = 2.0 * sqrt_rho * (t + sqrt_rho);
    const double e = std::exp(-2.0 * std::abs(x));
    const double softplus = std::max(-2.0 * x, 0.0) + std::log1p(e);
    const double one_minus_tanh = x >= 0.0 ? 2.0 * e / (1.0 + e) : 2.0 / (1.0 + e);
    const double sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
    return {wgt * softplus, wgt * one_minus_tanh, wgt * sech2 * sech2};
  }
};

inline InfoValues evaluate_real(const ConstellationState& st, double rho, const QuadratureSpec& q) {
  const double log2m = std::log2(static_cast<double>(st.real_points.size()));
  quad::AdaptiveOptions<3> opt;
  opt.rel_tol = q.rel_tol;
  const double sr = std::sqrt(rho);
  if (st.antipodal) {
    const auto v = quad::integrate<3>(AntipodalKernel{sr}, -kNoiseSpan, kNoiseSpan, {-sr}, opt);
    return {log2m - v[0] * kLog2e, v[1], -2.0 * v[2]};
  }
  std::vector<double> sorted = st.real_points;
  std::sort(sorted.begin(), sorted.end());
  // A set symmetric about zero contributes equally from s and -s.
  bool symmetric = true;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    if (std::abs(sorted[j] + sorted[sorted.size() - 1 - j]) > 1e-14) symmetric = false;
  }
  std::array<double, 3> acc{};
  for (double sk : st.real_points) {
    double mult = 1.0;
    if (symmetric) {
      if (sk < 0.0) continue;
      if (sk > 0.0) mult = 2.0;
    }
    std::vector<double> breaks;
    for (std::size_t j = 0; j + 1 < sorted.size(); ++j) {
      breaks.push_back(sr * (0.5 * (sorted[j] + sorted[j + 1]) - sk));
    }
    RealKernel kern{st.real_points, sk, rho, sr, std::vector<double>(st.real_points.size())};
    const auto v = quad::integrate<3>(kern, -kNoiseSpan, kNoiseSpan, std::move(breaks), opt);
    for (std::size_t k = 0; k < 3; ++k) acc[k] += mult * v[k];
  }
  const double inv = 1.0 / static_cast<double>(st.real_points.size());
  return {log2m - acc[0] * inv * kLog2e, acc[1] * inv, -2.0 * acc[2] * inv};
}

inline InfoValues evaluate_complex(const ConstellationState& st, double rho,
                                   const QuadratureSpec& q) {
  const quad::Rule rule = q.hermite_rule();
  const auto& pts = st.points;
  const std::size_t m = pts.size();
  const double sr = std::sqrt(rho);
  std::vector<double> prob(m);
  double mi = 0.0;
  double mm = 0.0;
  double dm = 0.0;
  for (const auto& sk : pts) {
    for (std::size_t a = 0; a < rule.size(); ++a) {
      for (std::size_t b = 0; b < rule.size(); ++b) {
        const double w = rule.weights[a] * rule.weights[b] / std::numbers::pi;
        const std::complex<double> n(rule.nodes[a], rule.nodes[b]);
        double mx = -kInf;
        for (std::size_t j = 0; j < m; ++j) {
          const std::complex<double> d = sk - pts[j];
          prob[j] = -rho * std::norm(d) - 2.0 * sr * (std::conj(d) * n).real();
          mx = std::max(mx, prob[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          prob[j] = std::exp(prob[j] - mx);
          z += prob[j];
        }
        std::complex<double> err(0.0, 0.0);
        std::complex<double> shat(0.0, 0.0);
        for (std::size_t j = 0; j < m; ++j) {
          prob[j] /= z;
          err += prob[j] * (sk - pts[j]);
          shat += prob[j] * pts[j];
        }
        double var = 0.0;
        std::complex<double> pvar(0.0, 0.0);
        for (std::size_t j = 0; j < m; ++j) {
          const std::complex<double> d = pts[j] - shat;
          var += prob[j] * std::norm(d);
          pvar += prob[j] * d * d;
        }
        mi += w * (mx + std::log(z));
        mm += w * std::norm(err);
        dm += w * (var * var + std::norm(pvar));
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(m);
  return {std::log2(static_cast<double>(m)) - mi * inv * kLog2e, mm * inv, -dm * inv};
}

inline InfoValues evaluate_direct(const ConstellationState& st, double rho, const QuadratureSpec& q) {
  switch (st.route) {
    case Route::Gaussian:
      return {std::log2(1.0 + rho), 1.0 / (1.0 + rho), -1.0 / ((1.0 + rho) * (1.0 + rho))};
    case Route::Real:
      return evaluate_real(st, rho, q);
    case Route::Product: {
      const InfoValues c = evaluate_direct(*st.component, 0.5 * rho, q);
      return {2.0 * c.mi_bits, c.mmse, 0.5 * c.dmmse};
    }
    case Route::Complex:
      return evaluate_complex(st, rho, q);
  }
  return {};
}

// Exact values at rho = 0: MMSE(0) = Var(s), dMMSE/drho(0) = -(Var^2 + |E(s - m)^2|^2).
inline std::pair<double, double> origin_values(const std::vector<std::complex<double>>& pts) {
  std::complex<double> mean(0.0, 0.0);
  for (const auto& s : pts) mean += s;
  mean /= static_cast<double>(pts.size());
  double var = 0.0;
  std::complex<double> pvar(0.0, 0.0);
  for (const auto& s : pts) {
    var += std::norm(s - mean);
    pvar += (s - mean) * (s - mean);
  }
  var /= static_cast<double>(pts.size());
  pvar /= static_cast<double>(pts.size());
  return {var, -(var * var + std::norm(pvar))};
}

inline constexpr double kTableLogRhoMin = -16.0;
inline constexpr double kTableStep = 0.02;
inline constexpr double kTableLogRhoMax = 18.5;

inline std::unique_ptr<InfoTable> build_table(const ConstellationState& st) {
  const QuadratureSpec q;
  auto t = std::make_unique<InfoTable>();
  std::vector<std::complex<double>> pts = st.points;
  if (st.route == Route::Real) {
    pts.clear();
    for (double x : st.real_points) pts.emplace_back(x, 0.0);
  }
  const auto [m0, dm0] = origin_values(pts);
  t->mmse0 = m0;
  t->dmmse0 = dm0;
  t->mi_max = std::log2(static_cast<double>(pts.size()));
  // Gauss-Hermite loses relative accuracy on tiny MMSE values.
  const double log_mmse_floor = st.route == Route::Complex ? std::log(1e-13) : -700.0;

  std::vector<double> mi;
  std::vector<double> dmi;
  std::vector<double> lm;
  std::vector<double> dlm;
  double u = kTableLogRhoMin;
  for (int k = 0;; ++k) {
    u = kTableLogRhoMin + kTableStep * k;
    const double rho = std::exp(u);
    const InfoValues v = evaluate_direct(st, rho, q);
    if (!(v.mmse > 0.0) || std::log(v.mmse) < log_mmse_floor || u > kTableLogRhoMax) break;
    mi.push_back(v.mi_bits);
    dmi.push_back(rho * v.mmse * kLog2e);
    lm.push_back(std::log(v.mmse));
    dlm.push_back(rho * v.dmmse / v.mmse);
  }
  if (mi.size() < 4) throw NumericalError("MMSE table for '" + st.name + "' is degenerate");
  t->rho_min = std::exp(kTableLogRhoMin);
  t->rho_max = std::exp(kTableLogRhoMin + kTableStep * static_cast<double>(mi.size() - 1));
  t->tail_slope = dlm.back() / t->rho_max;
  t->mi = UniformHermite(kTableLogRhoMin, kTableStep, std::move(mi), std::move(dmi));
  t->log_mmse = UniformHermite(kTableLogRhoMin, kTableStep, std::move(lm), std::move(dlm));
  return t;
}

inline const InfoTable& table_of(const ConstellationState& st) {
  std::call_once(st.table_once, [&] { st.table = build_table(st); });
  return *st.table;
}

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

}  // namespace detail

// Equiprobable unit-power signal set, or the Gaussian input.
//
// Copies share one immutable state, including the lazily built MMSE/MI
// table used by the solvers; the table is built once under std::call_once.
class Constellation {
 public:
  // Built-in sets are process-wide, so their tables are built at most once.
  static Constellation gaussian() {
    static const Constellation c = [] {
      auto st = std::make_shared<detail::ConstellationState>();
      st->name = "gaussian";
      st->route = detail::Route::Gaussian;
      return Constellation(std::move(st));
    }();
    return c;
  }

  static Constellation bpsk() {
    static const Constellation c = real_set("bpsk", {-1.0, 1.0});
    return c;
  }

  static Constellation pam4() {
    static const Constellation c = real_set("4pam", {-3.0, -1.0, 1.0, 3.0});
    return c;
  }

  static Constellation qpsk() {
    static const Constellation c = product("qpsk", bpsk());
    return c;
  }

  static Constellation qam16() {
    static const Constellation c = product("16qam", pam4());
    return c;
  }

  static Constellation from_name(std::string_view name) {
    const std::string n = detail::lowercase(name);
    if (n == "gaussian") return gaussian();
    if (n == "bpsk") return bpsk();
    if (n == "qpsk") return qpsk();
    if (n == "4pam" || n == "4-pam") return pam4();
    if (n == "16qam" || n == "16-qam") return qam16();
    throw ConfigError("unknown constellation '" + std::string(name) + "'");
  }

  // Arbitrary equiprobable point list, renormalized to unit average power.
  static Constellation from_points(std::string name, std::vector<std::complex<double>> pts) {
    return Constellation(make_state(std::move(name), std::move(pts)));
  }

  // Same signal set with the low-SNR curvature supplied explicitly (bits).
  Constellation with_curvature(double curvature_bits) const {
    if (!(curvature_bits < 0.0) || !std::isfinite(curvature_bits)) {
      throw ConfigError("curvature override must be finite and negative");
    }
    auto st = std::make_shared<detail::ConstellationState>();
    st->name = state_->name;
    st->route = state_->route;
    st->points = state_->points;
    st->real_points = state_->real_points;
    st->antipodal = state_->antipodal;
    st->component = state_->component;
    st->curvature_override = curvature_bits;
    return Constellation(std::move(st));
  }

  InputKind kind() const {
    return state_->route == detail::Route::Gaussian ? InputKind::Gaussian : InputKind::Discrete;
  }
  bool is_gaussian() const { return kind() == InputKind::Gaussian; }
  const std::string& name() const { return state_->name; }
  const std::vector<std::complex<double>>& points() const { return state_->points; }
  std::size_t size() const { return state_->points.size(); }
  std::optional<double> curvature_override() const { return state_->curvature_override; }

  // log2|X|, or +inf for the Gaussian input.
  double max_mi_bits() const {
    return is_gaussian() ? detail::kInf : std::log2(static_cast<double>(size()));
  }

  CurvatureClass curvature_class() const {
    switch (state_->route) {
      case detail::Route::Gaussian:
        return CurvatureClass::Gaussian;
      case detail::Route::Product:
        return CurvatureClass::ProperComplex;
      case detail::Route::Real:
      case detail::Route::Complex:
        break;
    }
    std::complex<double> mean(0.0, 0.0);
    std::complex<double> pseudo(0.0, 0.0);
    for (const auto& s : points()) {
      mean += s;
      pseudo += s * s;
    }
    mean /= static_cast<double>(size());
    pseudo /= static_cast<double>(size());
    if (std::abs(mean) > 1e-9) return CurvatureClass::Unclassified;
    if (state_->route == detail::Route::Real) return CurvatureClass::RealValued;
    return std::abs(pseudo) <= 1e-9 ? CurvatureClass::ProperComplex : CurvatureClass::Unclassified;
  }

  // Values from the cached table (direct closed forms for the Gaussian input).
  double mi(double rho) const {
    if (is_gaussian()) return std::log2(1.0 + rho);
    const auto& [t, scale, factor] = table_view();
    const double r = rho * scale;
    if (r <= 0.0) return 0.0;
    if (r < t.rho_min) return factor * detail::kLog2e * (t.mmse0 * r + 0.5 * t.dmmse0 * r * r);
    if (r >= t.rho_max) return factor * t.mi_max;
    return factor * t.mi(std::log(r));
  }

  double log_mmse(double rho) const {
    if (is_gaussian()) return -std::log1p(rho);
    const auto& [t, scale, factor] = table_view();
    const double r = rho * scale;
    if (r <= 0.0) return std::log(t.mmse0);
    if (r < t.rho_min) return std::log(t.mmse0 + t.dmmse0 * r);
    if (r >= t.rho_max) return t.log_mmse.back() + t.tail_slope * (r - t.rho_max);
    return t.log_mmse(std::log(r));
  }

  double mmse(double rho) const { return std::exp(log_mmse(rho)); }

  // Smallest rho with MMSE(rho) = target, from the cached table.
  double mmse_inv(double target) const {
    if (!(target > 0.0) || target > 1.0) throw DomainError("mmse inverse target must lie in (0, 1]");
    if (is_gaussian()) return 1.0 / target - 1.0;
    const auto& [t, scale, factor] = table_view();
    (void)factor;
    if (target >= t.mmse0 * (1.0 - 1e-15)) return 0.0;  // mmse0 carries rounding from normalization
    const double lt = std::log(target);
    double r;
    if (lt >= t.log_mmse.front()) {
      r = (target - t.mmse0) / t.dmmse0;
    } else if (lt <= t.log_mmse.back()) {
      r = t.rho_max + (lt - t.log_mmse.back()) / t.tail_slope;
    } else {
      double lo = t.log_mmse.x_front();
      double hi = t.log_mmse.x_back();
      for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (t.log_mmse(mid) > lt) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      r = std::exp(0.5 * (lo + hi));
    }
    return r / scale;
  }

  // Forces construction of the cached table.
  void warm() const {
    if (!is_gaussian()) (void)table_view();
  }

  const detail::ConstellationState& state() const { return *state_; }

 private:
  explicit Constellation(std::shared_ptr<const detail::ConstellationState> st)
      : state_(std::move(st)) {}

  static std::shared_ptr<detail::ConstellationState> make_state(
      std::string name, std::vector<std::complex<double>> pts) {
    if (pts.size() < 2) throw ConfigError("constellation needs at least two points");
    double power = 0.0;
    double scale_im = 0.0;
    for (const auto& s : pts) {
      if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) {
        throw ConfigError("constellation points must be finite");
      }
      power += std::norm(s);
      scale_im = std::max(scale_im, std::abs(s.imag()));
    }
    power /= static_cast<double>(pts.size());
    if (!(power > 0.0)) throw ConfigError("constellation has zero power");
    const double g = 1.0 / std::sqrt(power);
    auto st = std::make_shared<detail::ConstellationState>();
    st->name = std::move(name);
    for (auto& s : pts) s *= g;
    if (scale_im * g <= 1e-12) {
      st->route = detail::Route::Real;
      for (auto& s : pts) {
        s = {s.real(), 0.0};
        st->real_points.push_back(s.real());
      }
    } else {
      st->route = detail::Route::Complex;
    }
    st->points = std::move(pts);
    return st;
  }

  static Constellation real_set(std::string name, const std::vector<double>& pts) {
    std::vector<std::complex<double>> c;
    for (double x : pts) c.emplace_back(x, 0.0);
    auto st = make_state(std::move(name), std::move(c));
    st->antipodal = st->real_points.size() == 2;
    return Constellation(std::move(st));
  }

  static Constellation product(std::string name, const Constellation& comp) {
    auto st = std::make_shared<detail::ConstellationState>();
    st->name = std::move(name);
    st->route = detail::Route::Product;
    st->component = comp.state_;
    const double g = std::sqrt(0.5);
    for (double a : comp.state_->real_points) {
      for (double b : comp.state_->real_points) st->points.emplace_back(g * a, g * b);
    }
    return Constellation(std::move(st));
  }

  struct TableView {
    const detail::InfoTable& table;
    double scale;   // rho multiplier into the table's argument
    double factor;  // mutual information multiplier
  };

  TableView table_view() const {
    if (state_->route == detail::Route::Product) {
      return {detail::table_of(*state_->component), 0.5, 2.0};
    }
    return {detail::table_of(*state_), 1.0, 1.0};
  }

  std::shared_ptr<const detail::ConstellationState> state_;
};

// Direct quadrature: mutual information (bits), MMSE and its derivative.
inline InfoValues evaluate(const Constellation& c, double rho, const QuadratureSpec& q = {}) {
  q.validate();
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw DomainError("rho must be finite and nonnegative");
  if (rho == 0.0 && !c.is_gaussian()) {
    std::vector<std::complex<double>> pts = c.points();
    const auto [m0, dm0] = detail::origin_values(pts);
    return {0.0, m0, dm0};
  }
  return detail::evaluate_direct(c.state(), rho, q);
}

inline double mutual_information(const Constellation& c, double rho, const QuadratureSpec& q = {}) {
  return evaluate(c, rho, q).mi_bits;
}

inline double mmse(const Constellation& c, double rho, const QuadratureSpec& q = {}) {
  return evaluate(c, rho, q).mmse;
}

// rho with MMSE(rho) = target by bracketed bisection on the direct MMSE.
inline double mmse_inverse(const Constellation& c, double target, const QuadratureSpec& q = {}) {
  q.validate();
  if (!(target > 0.0) || target > 1.0) throw DomainError("mmse_inverse: target must lie in (0, 1]");
  if (c.is_gaussian()) return 1.0 / target - 1.0;
  if (target >= mmse(c, 0.0, q) * (1.0 - 1e-15)) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  while (mmse(c, hi, q) >= target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw NumericalError("mmse_inverse: target below representable MMSE");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = mmse(c, mid, q);
    if (std::abs(v - target) <= 1e-10 * target || hi - lo <= 1e-15 * hi) return mid;
    if (v > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Second derivative of I at rho = 0, in bits.
inline double mi_second_derivative_at_zero(const Constellation& c) {
  if (const auto v = c.curvature_override()) return *v;
  switch (c.curvature_class()) {
    case CurvatureClass::Gaussian:
    case CurvatureClass::ProperComplex:
      return -detail::kLog2e;
    case CurvatureClass::RealValued:
      return -2.0 * detail::kLog2e;
    case CurvatureClass::Unclassified:
      break;
  }
  throw ConfigError("constellation '" + c.name() +
                    "' is neither proper-complex nor zero-mean real; supply its curvature "
                    "I''(0) explicitly");
}

}  // namespace effcap
