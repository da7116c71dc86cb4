// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The effcap Authors
#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include "effcap/error.hpp"

namespace effcap::special {

namespace detail {

constexpr double kEps = 1e-16;
constexpr int kMaxTerms = 100000;

// Series for the lower regularized gamma P(a, x), a > 0.
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int n = 0; n < kMaxTerms; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Modified Lentz evaluation of the Legendre continued fraction
// Gamma(a, x) = e^{-x} x^a / (x + 1 - a - 1(1-a)/(x + 3 - a - ...)).
// Returns the fraction only; valid for any real a when x > 0.
inline double upper_gamma_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw NumericalError("upper incomplete gamma: continued fraction did not converge");
}

}  // namespace detail

// Regularized lower incomplete gamma P(a, x) for a > 0, x >= 0.
inline double gamma_p(double a, double x) {
  if (!(a > 0.0)) throw DomainError("gamma_p requires a > 0");
  if (x < 0.0) throw DomainError("gamma_p requires x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::upper_gamma_fraction(a, x) *
                   std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
inline double gamma_q(double a, double x) {
  if (!(a > 0.0)) throw DomainError("gamma_q requires a > 0");
  if (x < 0.0) throw DomainError("gamma_q requires x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::upper_gamma_fraction(a, x) * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Exponential integral E1(x) = Gamma(0, x), x > 0.
inline double expint_e1(double x) {
  if (!(x > 0.0)) throw DomainError("expint_e1 requires x > 0");
  if (x >= 1.0) return std::exp(-x) * detail::upper_gamma_fraction(0.0, x);
  double sum = 0.0;
  double term = 1.0;
  for (int k = 1; k < detail::kMaxTerms; ++k) {
    term *= -x / k;
    const double add = term / k;
    sum += add;
    if (std::abs(add) < detail::kEps * std::abs(sum)) break;
  }
  return -std::numbers::egamma - std::log(x) - sum;
}

// Non-regularized upper incomplete gamma Gamma(a, x) for any real a and x > 0.
// Non-positive a is reached by the downward recurrence
// Gamma(a, x) = (Gamma(a + 1, x) - x^a e^{-x}) / a.
inline double upper_incomplete_gamma(double a, double x) {
  if (!(x > 0.0)) throw DomainError("upper_incomplete_gamma requires x > 0");
  if (a > 0.0) {
    if (x >= a + 1.0) return std::exp(-x + a * std::log(x)) * detail::upper_gamma_fraction(a, x);
    return std::tgamma(a) * gamma_q(a, x);
  }
  if (x >= 1.0 - a) return std::exp(-x + a * std::log(x)) * detail::upper_gamma_fraction(a, x);

  const double steps = std::ceil(-a);
  const double top = a + steps;  // in [0, 1)
  double value = top == 0.0 ? expint_e1(x) : std::tgamma(top) * gamma_q(top, x);
  for (double s = top - 1.0; s >= a - 0.5; s -= 1.0) {
    value = (value - std::exp(s * std::log(x) - x)) / s;
  }
  return value;
}

// e^{-x} I0(x) for x >= 0.
inline double bessel_i0_scaled(double x) {
  x = std::abs(x);
  if (x <= 20.0) {
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 500; ++k) {
      term *= q / (static_cast<double>(k) * k);
      sum += term;
      if (term < detail::kEps * sum) break;
    }
    return sum * std::exp(-x);
  }
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * x);
    if (next > term) break;
    term = next;
    sum += term;
    if (term < detail::kEps * sum) break;
  }
  return sum / std::sqrt(2.0 * std::numbers::pi * x);
}

inline double bessel_i0(double x) {
  return bessel_i0_scaled(x) * std::exp(std::abs(x));
}

}  // namespace effcap::special
