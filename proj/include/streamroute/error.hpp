// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace streamroute {

enum class ErrorKind { Configuration, Structural, Sequencing, Data, Numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(ErrorKind::Configuration, m) {}
};

class StructuralError : public Error {
 public:
  explicit StructuralError(const std::string& m) : Error(ErrorKind::Structural, m) {}
};

class SequencingError : public Error {
 public:
  explicit SequencingError(const std::string& m) : Error(ErrorKind::Sequencing, m) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& m) : Error(ErrorKind::Data, m) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& m) : Error(ErrorKind::Numerical, m) {}
};

// Process exit code for the CLI: 2 for data/config problems, 3 for numerical failures.
inline int exit_code(ErrorKind kind) noexcept {
  return kind == ErrorKind::Numerical ? 3 : 2;
}

}  // namespace streamroute
