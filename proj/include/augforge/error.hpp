#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace augforge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument, configuration value or shape mismatch.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A loss, gradient or coordinate stopped being finite.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, long iteration = -1)
      : Error(iteration >= 0 ? what + " (iteration " + std::to_string(iteration) + ")" : what),
        iteration_(iteration) {}

  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

/// Dataset CSV parse failure. `line` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  enum class Kind { no_samples, ragged_row, non_numeric, negative_label, io };

  ParseError(Kind kind, std::size_t line, const std::string& what)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        kind_(kind),
        line_(line) {}

  Kind kind() const noexcept { return kind_; }
  std::size_t line() const noexcept { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

// Model file failures. Each is distinct so callers can tell them apart.
class ModelFileError : public Error {
 public:
  using Error::Error;
};
class ModelVersionError : public ModelFileError {
 public:
  using ModelFileError::ModelFileError;
};
class MalformedModelError : public ModelFileError {
 public:
  using ModelFileError::ModelFileError;
};
class ModelShapeError : public ModelFileError {
 public:
  using ModelFileError::ModelFileError;
};

}  // namespace augforge
