#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace logitclip {

// Shape mismatch or empty input where a non-empty one is required.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid hyperparameter or unsupported option combination.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed input file. `line` is 1-based; 0 when the error is not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Training produced a non-finite loss.
class NumericalAbort : public std::runtime_error {
 public:
  NumericalAbort(std::size_t epoch, std::size_t batch, double value)
      : std::runtime_error("non-finite loss " + std::to_string(value) + " at epoch " +
                           std::to_string(epoch) + ", batch " + std::to_string(batch)),
        epoch_(epoch),
        batch_(batch),
        value_(value) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }
  double value() const noexcept { return value_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
  double value_;
};

}  // namespace logitclip
