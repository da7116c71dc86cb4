// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The effcap Authors
#pragma once

#include <stdexcept>
#include <string>

namespace effcap {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user-supplied parameters or configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Bracket expansion or other numerical failure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// An iterative procedure ran out of iterations; carries its last iterate.
class IterationLimitError : public NumericalError {
 public:
  IterationLimitError(const std::string& what, double last_iterate, double last_residual)
      : NumericalError(what), last_iterate_(last_iterate), last_residual_(last_residual) {}

  double last_iterate() const noexcept { return last_iterate_; }
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_iterate_;
  double last_residual_;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace detail
}  // namespace effcap
