// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The effcap Authors
#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "effcap/error.hpp"

namespace effcap::quad {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix with diagonal
// `diag` and off-diagonal `offdiag`. Weights use the Christoffel form
// 1 / sum_k p_k(x)^2 over the orthonormal polynomials, evaluated with
// rescaling, which keeps tiny weights at large nodes relatively accurate.
inline Rule golub_welsch(const std::vector<double>& diag, const std::vector<double>& offdiag,
                         double mu0) {
  const auto n = static_cast<Eigen::Index>(diag.size());
  Eigen::VectorXd d(n);
  Eigen::VectorXd e(n > 1 ? n - 1 : 0);
  for (Eigen::Index i = 0; i < n; ++i) d[i] = diag[static_cast<std::size_t>(i)];
  for (Eigen::Index i = 0; i + 1 < n; ++i) e[i] = offdiag[static_cast<std::size_t>(i)];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(d, e, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("Golub-Welsch eigensolver failed");
  Rule r;
  r.nodes.resize(diag.size());
  r.weights.resize(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) {
    const double x = solver.eigenvalues()[static_cast<Eigen::Index>(i)];
    double prev = 0.0;
    double cur = 1.0 / std::sqrt(mu0);
    double sum = cur * cur;
    double log_scale = 0.0;
    for (std::size_t k = 0; k + 1 < diag.size(); ++k) {
      const double next = ((x - diag[k]) * cur - (k > 0 ? offdiag[k - 1] * prev : 0.0)) / offdiag[k];
      prev = cur;
      cur = next;
      sum += cur * cur;
      if (std::abs(cur) > 1e100) {
        prev *= 1e-100;
        cur *= 1e-100;
        sum *= 1e-200;
        log_scale += 200.0 * std::log(10.0);
      }
    }
    r.nodes[i] = x;
    r.weights[i] = std::exp(-std::log(sum) - log_scale);
  }
  return r;
}

namespace detail {

inline void symmetrize(Rule& r) {
  const std::size_t n = r.size();
  for (std::size_t i = 0; i < n / 2; ++i) {
    const std::size_t j = n - 1 - i;
    const double x = 0.5 * (r.nodes[j] - r.nodes[i]);
    const double w = 0.5 * (r.weights[i] + r.weights[j]);
    r.nodes[i] = -x;
    r.nodes[j] = x;
    r.weights[i] = w;
    r.weights[j] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
}

}  // namespace detail

// Gauss-Hermite rule for the weight e^{-x^2} on the real line.
inline Rule gauss_hermite(int n) {
  if (n < 1) throw ConfigError("Gauss-Hermite order must be positive");
  std::vector<double> a(static_cast<std::size_t>(n), 0.0);
  std::vector<double> b(static_cast<std::size_t>(n > 1 ? n - 1 : 0));
  for (int k = 1; k < n; ++k) b[static_cast<std::size_t>(k - 1)] = std::sqrt(0.5 * k);
  Rule r = golub_welsch(a, b, std::sqrt(std::numbers::pi));
  detail::symmetrize(r);
  return r;
}

// Generalized Gauss-Laguerre rule for the weight x^alpha e^{-x} on [0, inf).
inline Rule gauss_laguerre(int n, double alpha = 0.0) {
  if (n < 1) throw ConfigError("Gauss-Laguerre order must be positive");
  if (!(alpha > -1.0)) throw ConfigError("Gauss-Laguerre requires alpha > -1");
  std::vector<double> a(static_cast<std::size_t>(n));
  std::vector<double> b(static_cast<std::size_t>(n > 1 ? n - 1 : 0));
  for (int k = 0; k < n; ++k) a[static_cast<std::size_t>(k)] = 2.0 * k + alpha + 1.0;
  for (int k = 1; k < n; ++k) b[static_cast<std::size_t>(k - 1)] = std::sqrt(k * (k + alpha));
  return golub_welsch(a, b, std::tgamma(alpha + 1.0));
}

// Gauss-Legendre rule on [-1, 1].
inline Rule gauss_legendre(int n) {
  if (n < 1) throw ConfigError("Gauss-Legendre order must be positive");
  std::vector<double> a(static_cast<std::size_t>(n), 0.0);
  std::vector<double> b(static_cast<std::size_t>(n > 1 ? n - 1 : 0));
  for (int k = 1; k < n; ++k) {
    b[static_cast<std::size_t>(k - 1)] = k / std::sqrt(4.0 * k * k - 1.0);
  }
  Rule r = golub_welsch(a, b, 2.0);
  detail::symmetrize(r);
  return r;
}

// Adaptive Gauss-Kronrod (7/15) integration of a vector-valued integrand.
// F maps double -> std::array<double, N>. A subinterval is accepted once every
// component's error estimate is within max(abs_tol, rel_tol * |estimate|),
// where the estimate is the running whole-interval value.
template <std::size_t N>
struct AdaptiveOptions {
  double abs_tol = 1e-300;
  double rel_tol = 1e-13;
  int max_depth = 40;
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodX = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodW = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussW = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <std::size_t N, class F>
void kronrod15(F& f, double a, double b, std::array<double, N>& kron,
               std::array<double, N>& err) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  std::array<double, N> gauss{};
  kron.fill(0.0);
  const auto center = f(c);
  for (std::size_t k = 0; k < N; ++k) {
    kron[k] = center[k] * kKronrodW[7];
    gauss[k] = center[k] * kGaussW[3];
  }
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = h * kKronrodX[j];
    const auto lo = f(c - dx);
    const auto hi = f(c + dx);
    for (std::size_t k = 0; k < N; ++k) {
      const double s = lo[k] + hi[k];
      kron[k] += kKronrodW[j] * s;
      if (j % 2 == 1) gauss[k] += kGaussW[j / 2] * s;
    }
  }
  for (std::size_t k = 0; k < N; ++k) {
    kron[k] *= h;
    gauss[k] *= h;
    err[k] = std::abs(kron[k] - gauss[k]);
  }
}

template <std::size_t N, class F>
std::array<double, N> adapt(F& f, double a, double b, const std::array<double, N>& whole,
                            const AdaptiveOptions<N>& opt, int depth) {
  std::array<double, N> value{};
  std::array<double, N> err{};
  kronrod15<N>(f, a, b, value, err);
  bool ok = true;
  for (std::size_t k = 0; k < N; ++k) {
    const double scale = std::max(std::abs(whole[k]), std::abs(value[k]));
    if (err[k] > std::max(opt.abs_tol, opt.rel_tol * scale)) ok = false;
  }
  if (ok || depth >= opt.max_depth) return value;
  const double m = 0.5 * (a + b);
  const auto left = adapt<N>(f, a, m, whole, opt, depth + 1);
  const auto right = adapt<N>(f, m, b, whole, opt, depth + 1);
  for (std::size_t k = 0; k < N; ++k) value[k] = left[k] + right[k];
  return value;
}

}  // namespace detail

// Integrates f over [a, b] split at the sorted `breaks` lying strictly inside.
template <std::size_t N, class F>
std::array<double, N> integrate(F f, double a, double b, std::vector<double> breaks = {},
                                const AdaptiveOptions<N>& opt = {}) {
  breaks.erase(std::remove_if(breaks.begin(), breaks.end(),
                              [&](double x) { return !(x > a && x < b); }),
               breaks.end());
  std::sort(breaks.begin(), breaks.end());
  std::vector<double> edges;
  edges.reserve(breaks.size() + 2);
  edges.push_back(a);
  for (double x : breaks) {
    if (x > edges.back()) edges.push_back(x);
  }
  edges.push_back(b);

  // A coarse pass fixes the relative scale for tolerance decisions.
  std::array<double, N> whole{};
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    std::array<double, N> v{};
    std::array<double, N> e{};
    detail::kronrod15<N>(f, edges[i], edges[i + 1], v, e);
    for (std::size_t k = 0; k < N; ++k) whole[k] += v[k];
  }
  std::array<double, N> total{};
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const auto v = detail::adapt<N>(f, edges[i], edges[i + 1], whole, opt, 0);
    for (std::size_t k = 0; k < N; ++k) total[k] += v[k];
  }
  return total;
}

template <class F>
double integrate_scalar(F f, double a, double b, std::vector<double> breaks = {},
                        double rel_tol = 1e-13) {
  AdaptiveOptions<1> opt;
  opt.rel_tol = rel_tol;
  auto g = [&](double x) { return std::array<double, 1>{f(x)}; };
  return integrate<1>(g, a, b, std::move(breaks), opt)[0];
}

// Integral of f over [a, inf) through the map x = a + t / (1 - t).
template <class F>
double integrate_to_infinity(F f, double a, double rel_tol = 1e-13) {
  auto g = [&](double t) {
    if (t >= 1.0) return 0.0;
    const double s = 1.0 - t;
    const double v = f(a + t / s);
    return v == 0.0 ? 0.0 : v / (s * s);
  };
  return integrate_scalar(g, 0.0, 1.0, {}, rel_tol);
}

}  // namespace effcap::quad
