/*
 * Copyright 2026 The dpimb Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace dpimb {

// Error categories. The CLI maps each category onto its exit code.
enum class ErrorKind {
  kInvalidParameter,
  kOutOfRange,
  kData,
  kConvergence,
  kConfiguration,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidParameter : public Error {
 public:
  explicit InvalidParameter(const std::string& what)
      : Error(ErrorKind::kInvalidParameter, what) {}
};

// Parameter outside the range where a mechanism's guarantee holds.
class OutOfRange : public Error {
 public:
  explicit OutOfRange(const std::string& what)
      : Error(ErrorKind::kOutOfRange, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

// Solver did not reach its gradient tolerance; carries the last gradient norm.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double gradient_norm)
      : Error(ErrorKind::kConvergence, what), gradient_norm_(gradient_norm) {}

  double gradient_norm() const noexcept { return gradient_norm_; }

 private:
  double gradient_norm_;
};

// A configuration that cannot be run within its privacy budget.
class ConfigurationError : public Error {
 public:
  explicit ConfigurationError(const std::string& what)
      : Error(ErrorKind::kConfiguration, what) {}
};

// Rethrows e as the same category with a context prefix on the message.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& context) {
  const std::string what = context + ": " + e.what();
  switch (e.kind()) {
    case ErrorKind::kInvalidParameter:
      throw InvalidParameter(what);
    case ErrorKind::kOutOfRange:
      throw OutOfRange(what);
    case ErrorKind::kData:
      throw DataError(what);
    case ErrorKind::kConvergence:
      throw ConvergenceError(what, static_cast<const ConvergenceError&>(e).gradient_norm());
    case ErrorKind::kConfiguration:
      throw ConfigurationError(what);
  }
  throw Error(e.kind(), what);
}

}  // namespace dpimb
