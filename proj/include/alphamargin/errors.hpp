/* Copyright 2026 The AlphaMargin Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>

namespace alphamargin {

// Argument outside the mathematical domain of a function (e.g. u < 0 in f).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Vector lengths or matrix shapes that do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The threshold root-finder could not bracket or converge.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user configuration (bad values, unknown keys).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Problems reading or writing dataset / checkpoint / trial files.
class FormatError : public std::runtime_error {
 public:
  enum class Kind { kIo, kCorruptHeader, kTruncated, kVersionMismatch, kParse };

  FormatError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Non-finite values encountered during training.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace alphamargin
