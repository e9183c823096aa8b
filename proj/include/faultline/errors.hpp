// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace faultline {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (bad index, mismatched formats,
// wrong vector length).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed text or file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

// A fault filter that no register/bit choice can satisfy.
class UnsatisfiableFilter : public Error {
 public:
  using Error::Error;
};

}  // namespace faultline
