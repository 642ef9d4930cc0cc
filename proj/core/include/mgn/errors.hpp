#pragma once

#include <stdexcept>
#include <string>

namespace mgn {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem-level failure: missing file, unreadable path, short write.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A track file that exists but does not parse as a valid container.
class FormatError : public Error {
 public:
  enum class Kind {
    BadMagic,       // leading bytes are not "MGF1"
    BadHeader,      // header fields out of range (zero dim, absurd name, ...)
    Truncated,      // payload shorter than the header promises
    TrailingBytes,  // payload longer than the header promises
    NonFinite,      // NaN or Inf in the value matrix
    LabelRange,     // labels track with values outside [0, 1] or dim != 15
  };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// A domain invariant was violated by in-memory data (pre-write validation,
/// mismatched shapes, out-of-range indices, unknown modalities).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Shape mismatch between tensors or between a tensor and a layer.
class ShapeError : public InvariantError {
 public:
  using InvariantError::InvariantError;
};

/// Non-finite values produced where finite math was required (training abort).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace mgn
