#pragma once

#include <stdexcept>
#include <string>

namespace wassreg {

// Base class for every error raised by the library. The CLI maps the
// concrete subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes disagree: empty point sets, mixed dimensions, mismatched vectors.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Values violate an invariant (weights off the simplex, NaN, bad config).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A file could not be decoded. `offset` is a byte offset for binary files
// and a byte position for JSON files; `line` is 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset, std::size_t line = 0)
      : Error(what), offset_(offset), line_(line) {}
  std::size_t offset() const { return offset_; }
  std::size_t line() const { return line_; }

 private:
  std::size_t offset_;
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Problem too large for an exact solver.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Kernel weights leave no training pair to fit on.
class SupportError : public Error {
 public:
  using Error::Error;
};

// Optimisation produced a non-finite loss.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// Numerically degenerate quantity, e.g. a zero R^2 denominator.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace wassreg
