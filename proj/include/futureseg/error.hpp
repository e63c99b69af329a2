#pragma once

#include <stdexcept>
#include <string>

namespace futureseg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible extents, channel counts or sequence lengths.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf appeared in a computed value.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A class index outside [0, K).
class ClassRangeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed binary file. Subclasses name the specific fault.
class FormatError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class BadVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace futureseg
