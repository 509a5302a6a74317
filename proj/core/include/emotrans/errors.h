// Copyright 2026 The emotrans Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace emotrans {

/// Base class of every error raised by the library. The CLI maps each
/// subclass onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not line up for an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A file exists but is not in the expected binary or JSON layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing failed, including truncated payloads.
class IoError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf detected, or a numeric routine failed to converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Input data or configuration rejected before any computation starts.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace emotrans
