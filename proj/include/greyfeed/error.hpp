#pragma once

#include <stdexcept>
#include <string>

namespace greyfeed {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape/extent disagreement between operands.
struct DimensionError : Error {
  using Error::Error;
};

// Invalid hyperparameter or enumeration value.
struct ParamError : Error {
  using Error::Error;
};

// Bad dataset content (zero-count class, empty dataset, ...).
struct DataError : Error {
  using Error::Error;
};

// Malformed textual or binary input.
struct ParseError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

// Metric undefined for the given inputs (e.g. no positive labels).
struct MetricError : Error {
  using Error::Error;
};

// API misuse (backward on a non-scalar, ...).
struct ContractError : Error {
  using Error::Error;
};

}  // namespace greyfeed
