// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace grnfuse {

// Violated precondition of a call (caller bug).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Tensor or matrix dimensions do not agree.
class ShapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Rows of two embedding blocks refer to different genes.
class AlignmentError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Input data is missing, malformed or inconsistent.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class LookupError : public DataError {
 public:
  using DataError::DataError;
};

class ConfigError : public DataError {
 public:
  using DataError::DataError;
};

// Input has no spread, so a statistic is undefined.
class DegenerateDataError : public DataError {
 public:
  using DataError::DataError;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace grnfuse
