#pragma once

#include <stdexcept>
#include <string>

namespace smile {

// Base of every error the library throws. The CLI maps NumericalError to
// exit status 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Index outside the valid range of a table or sequence.
class IndexError : public Error {
 public:
  using Error::Error;
};

// Violated precondition of an operation.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed corpus or checkpoint file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or parameter during training.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace smile
