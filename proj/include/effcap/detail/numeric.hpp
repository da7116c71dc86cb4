// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The effcap Authors
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "effcap/error.hpp"

namespace effcap::detail {

inline constexpr double kLog2e = std::numbers::log2e;
inline constexpr double kLn2 = std::numbers::ln2;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// log(sum_i w_i exp(x_i)) with w_i >= 0, shifted by the largest exponent.
inline double log_weighted_sum_exp(std::span<const double> w, std::span<const double> x) {
  double m = -kInf;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (w[i] > 0.0) m = std::max(m, x[i]);
  }
  if (m == -kInf) return -kInf;
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (w[i] > 0.0) s += w[i] * std::exp(x[i] - m);
  }
  return m + std::log(s);
}

// Bisection for a decreasing predicate-style root: f(lo) > 0 > f(hi).
// Stops when the bracket is narrower than rel_tol * |hi| + abs_tol.
template <class F>
double bisect_decreasing(F f, double lo, double hi, double rel_tol, double abs_tol,
                         int max_iters) {
  for (int it = 0; it < max_iters; ++it) {
    if (hi - lo <= rel_tol * std::abs(hi) + abs_tol) break;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Root of a decreasing function with bracket f(lo) > 0 > f(hi), by the
// Illinois variant of regula falsi with a bisection safeguard.
template <class F>
double illinois_decreasing(F f, double lo, double hi, double flo, double fhi, double x_tol,
                           double f_tol, int max_iters) {
  int side = 0;
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < max_iters; ++it) {
    if (hi - lo <= x_tol) return 0.5 * (lo + hi);
    double cand = (lo * fhi - hi * flo) / (fhi - flo);
    const double width = hi - lo;
    if (!(cand > lo + 1e-3 * width && cand < hi - 1e-3 * width)) cand = 0.5 * (lo + hi);
    x = cand;
    const double fx = f(x);
    if (std::abs(fx) <= f_tol) return x;
    if (fx > 0.0) {
      lo = x;
      flo = fx;
      if (side == 1) fhi *= 0.5;
      side = 1;
    } else {
      hi = x;
      fhi = fx;
      if (side == -1) flo *= 0.5;
      side = -1;
    }
  }
  return x;
}

// Cubic Hermite interpolation on a uniform grid x_k = x0 + k h with values
// and first derivatives.
class UniformHermite {
 public:
  UniformHermite() = default;
  UniformHermite(double x0, double h, std::vector<double> y, std::vector<double> dy)
      : x0_(x0), h_(h), y_(std::move(y)), dy_(std::move(dy)) {}

  double x_front() const { return x0_; }
  double x_back() const { return x0_ + h_ * static_cast<double>(y_.size() - 1); }
  double front() const { return y_.front(); }
  double back() const { return y_.back(); }
  double dback() const { return dy_.back(); }
  std::size_t size() const { return y_.size(); }

  double operator()(double x) const {
    const double s = (x - x0_) / h_;
    auto k = static_cast<std::ptrdiff_t>(std::floor(s));
    const auto last = static_cast<std::ptrdiff_t>(y_.size()) - 2;
    k = std::clamp<std::ptrdiff_t>(k, 0, last);
    const double t = s - static_cast<double>(k);
    const auto i = static_cast<std::size_t>(k);
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1;
    const double h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2;
    const double h11 = t3 - t2;
    return h00 * y_[i] + h10 * h_ * dy_[i] + h01 * y_[i + 1] + h11 * h_ * dy_[i + 1];
  }

 private:
  double x0_ = 0.0;
  double h_ = 1.0;
  std::vector<double> y_;
  std::vector<double> dy_;
};

// Fritsch-Carlson monotone piecewise-cubic interpolant on ascending knots.
class MonotoneCubic {
 public:
  MonotoneCubic() = default;
  MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    m_.assign(n, 0.0);
    if (n < 2) return;
    std::vector<double> delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) delta[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
    m_[0] = delta[0];
    m_[n - 1] = delta[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
      m_[i] = delta[i - 1] * delta[i] <= 0.0 ? 0.0 : 0.5 * (delta[i - 1] + delta[i]);
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (delta[i] == 0.0) {
        m_[i] = 0.0;
        m_[i + 1] = 0.0;
        continue;
      }
      const double a = m_[i] / delta[i];
      const double b = m_[i + 1] / delta[i];
      const double r = a * a + b * b;
      if (r > 9.0) {
        const double tau = 3.0 / std::sqrt(r);
        m_[i] = tau * a * delta[i];
        m_[i + 1] = tau * b * delta[i];
      }
    }
  }

  bool empty() const { return x_.empty(); }

  double operator()(double x) const {
    if (x_.size() == 1) return y_[0];
    if (x <= x_.front()) return y_.front();
    if (x >= x_.back()) return y_.back();
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const auto i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * m_[i] +
           (-2 * t3 + 3 * t2) * y_[i + 1] + (t3 - t2) * h * m_[i + 1];
  }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> m_;
};

}  // namespace effcap::detail
