// Copyright 2026 The contention-graph Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace contention {

/// Base of every error raised by the library. `exit_code()` maps the error
/// family onto the documented CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Matrix or tensor shapes do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

/// Invalid configuration value or combination.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Bad or missing input data (files, labels, schema).
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Missing column or malformed header in a trace file.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite loss, gradient or parameter.
class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 5; }
};

/// A caller broke an API contract (e.g. a stale forward cache).
class ContractError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 6; }
};

}  // namespace contention
