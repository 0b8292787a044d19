// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stochgrid {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid mesh, mismatched inputs, bad seeds, malformed experiment config.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A coefficient or integrand produced a non-finite value.
class NumericError : public Error {
public:
  NumericError(const std::string& what, std::size_t time_index)
      : Error(what + " (mesh index " + std::to_string(time_index) + ")"),
        time_index_(time_index) {}

  std::size_t time_index() const noexcept { return time_index_; }

private:
  std::size_t time_index_;
};

/// Argument outside the domain of a function (t outside [0, T], t >= maturity, ...).
class DomainError : public Error {
public:
  using Error::Error;
};

/// An intensity evaluator read the future or returned a non-positive value.
class AdaptednessError : public Error {
public:
  using Error::Error;
};

class UnsupportedError : public Error {
public:
  using Error::Error;
};

class InsufficientDataError : public Error {
public:
  using Error::Error;
};

/// Degenerate grid design (e.g. zero mean intensity normalizer).
class DesignError : public Error {
public:
  using Error::Error;
};

/// Audit inputs are inconsistent or could not be normalized.
class AuditError : public Error {
public:
  using Error::Error;
};

/// Hedging quantity requested beyond the truncation horizon.
class TruncationError : public Error {
public:
  using Error::Error;
};

}  // namespace stochgrid
