#pragma once

#include <stdexcept>
#include <string>

namespace cubit {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed compressed word stream (e.g. a fill word with run length 0).
struct CodecError : Error {
  using Error::Error;
};

/// Operand geometry mismatch (bit lengths, segmentation).
struct ShapeError : Error {
  using Error::Error;
};

/// Invalid configuration knob.
struct ConfigError : Error {
  using Error::Error;
};

/// Row ordinal outside the addressable range.
struct RangeError : Error {
  using Error::Error;
};

/// Attribute value not present in the index dictionary.
struct DomainError : Error {
  using Error::Error;
};

/// Update that would set a row to its current value.
struct NoopUpdateError : Error {
  using Error::Error;
};

/// Row exists as an ordinal but has been deleted.
struct NotFoundError : Error {
  using Error::Error;
};

}  // namespace cubit
