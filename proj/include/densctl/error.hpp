#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace densctl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad configuration, bad expression, wrong mode.
/// The CLI maps these to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : InputError(what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Fields or operators defined on different grids or with incompatible shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/inf produced while evaluating a field, or a function applied outside its domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Diffusion matrix is not symmetric positive definite somewhere on the grid.
class SpdError : public Error {
 public:
  using Error::Error;
};

/// Failure of a numerical routine (eigensolver, linear solve, lost monotonicity, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace densctl
