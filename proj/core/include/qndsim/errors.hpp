#pragma once

#include <stdexcept>
#include <string>

namespace qndsim {

/// Invalid call arguments (empty inputs, out-of-domain values).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Configuration validation failure. `field()` is the dotted path of the
/// offending key, e.g. "cavity.kappa_fwhm_hz".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Base for failures of a numerical procedure on valid input.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegrationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class EstimationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InsufficientDataError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

class FitError : public NumericalError {
 public:
  FitError(const std::string& what, double residual_rms)
      : NumericalError(what + " (residual rms " + std::to_string(residual_rms) + ")"),
        residual_rms_(residual_rms) {}
  double residual_rms() const noexcept { return residual_rms_; }

 private:
  double residual_rms_;
};

class DegeneratePopulationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace qndsim
