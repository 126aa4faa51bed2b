#pragma once

#include <stdexcept>
#include <string>

namespace ibd {

// Base of every error the library throws. The CLI maps subclasses of Error
// to the "data error" exit code; anything else is treated as internal.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input bytes do not follow the expected layout (bad magic, bad header,
// unsupported encoding, malformed text line).
class FormatError : public Error {
 public:
  using Error::Error;
};

// File could not be opened, read or written, or ended early.
class IoError : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but violates a precondition of the operation.
class DataError : public Error {
 public:
  using Error::Error;
};

// A segment has too few frames to be modelled.
class DegenerateSegmentError : public DataError {
 public:
  using DataError::DataError;
};

// Non-finite values, divergence, or a singular system.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ibd
