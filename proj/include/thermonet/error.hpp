#pragma once

#include <stdexcept>
#include <string>

namespace thermonet {

/// Category of a failure. The CLI maps these onto exit codes.
enum class ErrorKind {
  invalid_geometry,
  invalid_argument,
  dimension,
  integrator,
  spectral,
  convergence,
  projection,
  fit,
  configuration,
  structural,
  parse,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for failures of a numerical procedure (as opposed to bad input).
  bool is_numerical() const noexcept {
    switch (kind_) {
      case ErrorKind::integrator:
      case ErrorKind::spectral:
      case ErrorKind::convergence:
      case ErrorKind::projection:
      case ErrorKind::fit:
      case ErrorKind::structural:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace thermonet
