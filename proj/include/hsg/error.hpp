#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace hsg {

/// Failure categories surfaced by the library. The CLI maps these onto exit codes.
enum class ErrorKind {
  Domain,          // query outside the grid, radius <= 0, ball leaving the box
  Argument,        // malformed arguments (r_in >= r_out, bad exponent, ...)
  Geometry,        // incompatible balls / poles
  Resolution,      // mesh too coarse for the requested radii
  Connectivity,    // disconnected ball, annulus or region
  DegenerateMeasure,
  InvalidOperator,
  InvalidMatrix,
  Numeric,         // solver non-convergence
  Range,           // interpolation outside a sampled table
  Dependency,      // missing upstream report
  InsufficientData,
  InvalidConstants,
  Config,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Argument: return "argument";
    case ErrorKind::Geometry: return "geometry";
    case ErrorKind::Resolution: return "resolution";
    case ErrorKind::Connectivity: return "connectivity";
    case ErrorKind::DegenerateMeasure: return "degenerate-measure";
    case ErrorKind::InvalidOperator: return "invalid-operator";
    case ErrorKind::InvalidMatrix: return "invalid-matrix";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Range: return "range";
    case ErrorKind::Dependency: return "dependency";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::InvalidConstants: return "invalid-constants";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Solver failure that carries the residual it reached.
inline std::string format_residual(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", r);
  return buf;
}

class NumericError : public Error {
 public:
  NumericError(const std::string& what, double residual)
      : Error(ErrorKind::Numeric, what + " (residual " + format_residual(residual) + ")"),
        residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace hsg
