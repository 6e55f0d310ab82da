#pragma once

#include <stdexcept>
#include <string>

namespace hwdnet {

// Base for every error raised by the library. Subclasses map onto the CLI
// exit-code contract: input problems (1) versus runtime failures (2).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual bool is_input_error() const noexcept { return false; }
};

class InputError : public Error {
 public:
  using Error::Error;
  bool is_input_error() const noexcept override { return true; }
};

class ParseError : public InputError {
 public:
  using InputError::InputError;
};

class ValidationError : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class DimensionError : public InputError {
 public:
  using InputError::InputError;
};

class ContractViolation : public InputError {
 public:
  using InputError::InputError;
};

class SamplingError : public InputError {
 public:
  using InputError::InputError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Checkpoint could not be read, failed its checksum, or has an unsupported
// format version.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::string term, long step, const std::string& what)
      : Error(what), term_(std::move(term)), step_(step) {}
  const std::string& term() const noexcept { return term_; }
  long step() const noexcept { return step_; }

 private:
  std::string term_;
  long step_;
};

}  // namespace hwdnet
