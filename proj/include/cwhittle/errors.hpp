#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>

namespace cwhittle {

enum class ErrorKind {
  parameter_domain,
  domain,
  capability,
  usage,
  size,
  integration,
  model_validity,
  indefinite,
  not_positive_definite,
  embedding,
  numerical,
  config,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parameter_domain: return "parameter_domain";
    case ErrorKind::domain: return "domain";
    case ErrorKind::capability: return "capability";
    case ErrorKind::usage: return "usage";
    case ErrorKind::size: return "size";
    case ErrorKind::integration: return "integration";
    case ErrorKind::model_validity: return "model_validity";
    case ErrorKind::indefinite: return "indefinite";
    case ErrorKind::not_positive_definite: return "not_positive_definite";
    case ErrorKind::embedding: return "embedding";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Adaptive quadrature ran out of refinements; carries the panel with the
// largest remaining error estimate.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& message, double lo, double hi, double estimate)
      : Error(ErrorKind::integration, message), lo_(lo), hi_(hi), estimate_(estimate) {}

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  double estimate() const noexcept { return estimate_; }

 private:
  double lo_, hi_, estimate_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

using WarningHandler = std::function<void(const std::string&)>;

// Receives non-fatal numerical warnings; defaults to standard error.
inline WarningHandler& warning_handler() {
  static WarningHandler handler = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return handler;
}

inline void warn(const std::string& message) {
  if (warning_handler()) warning_handler()(message);
}

}  // namespace cwhittle
