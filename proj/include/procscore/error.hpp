#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace procscore {

// Invalid argument or violated precondition.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An item could not be calibrated (e.g. a single observed category).
class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(std::string item_id, const std::string& what)
      : std::runtime_error(what), item_id_(std::move(item_id)) {}
  const std::string& item_id() const noexcept { return item_id_; }

 private:
  std::string item_id_;
};

// The maximum likelihood estimate does not exist (monotone likelihood).
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Regression design without variation in the predictor.
class DegenerateDesignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A rank correlation with a constant argument.
class UndefinedCorrelationError : public DomainError {
 public:
  using DomainError::DomainError;
};

// A toy model or simulation config does not satisfy its stated assumptions.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. Carries one message per offending row.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& what, std::vector<std::string> details = {})
      : std::runtime_error(what), details_(std::move(details)) {}
  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  std::vector<std::string> details_;
};

}  // namespace procscore
