#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hgff {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct DivergenceError : Error { using Error::Error; };
struct EllipticityError : Error { using Error::Error; };
struct DegreeError : Error { using Error::Error; };
struct FitError : Error { using Error::Error; };
struct UnsupportedError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

// quadrature or search could not reach a verdict
struct InconclusiveError : Error {
  InconclusiveError(const std::string& what, double last = 0.0, double prev = 0.0)
      : Error(what), last_value(last), previous_value(prev) {}
  double last_value;
  double previous_value;
};

struct SolverError : Error {
  SolverError(const std::string& what, std::vector<double> history)
      : Error(what), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

}  // namespace hgff
