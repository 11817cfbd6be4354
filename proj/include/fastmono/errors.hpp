#pragma once

#include <stdexcept>
#include <string>

namespace fastmono {

/// Broad failure classes. The CLI maps them onto exit codes.
enum class ErrorKind {
  Domain,     // argument outside the domain of a function
  Geometry,   // invalid curve, overlapping rods, enclosure breach
  Config,     // malformed or inconsistent scenario
  Numerical,  // singular system, non-convergence, divergence
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Geometry: return "geometry";
    case ErrorKind::Config: return "config";
    case ErrorKind::Numerical: return "numerical";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

class GeometryError : public Error {
 public:
  explicit GeometryError(const std::string& what) : Error(ErrorKind::Geometry, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

/// Carries the residual reached when a solve fails so callers can report it.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double residual = -1.0, int iterations = -1)
      : Error(ErrorKind::Numerical, what), residual_(residual), iterations_(iterations) {}
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

}  // namespace fastmono
