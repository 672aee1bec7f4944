#pragma once

#include <stdexcept>
#include <string>

namespace uep {

// Failure categories. Each maps onto one CLI exit code.
enum class ErrorKind { data, parameter, infeasible };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Malformed or out-of-range input data (files, annotations, class maps).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

// Incompatible "format" tag in a serialized file.
class FormatError : public DataError {
 public:
  explicit FormatError(const std::string& what) : DataError(what) {}
};

// Invalid parameter value (sigma, m, t0, epsilon, patch size, ...).
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error(ErrorKind::parameter, what) {}
};

// The requested partition or derivation cannot exist for the given data.
class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& what) : Error(ErrorKind::infeasible, what) {}
};

inline int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::data: return 1;
    case ErrorKind::parameter: return 2;
    case ErrorKind::infeasible: return 3;
  }
  return 1;
}

}  // namespace uep
