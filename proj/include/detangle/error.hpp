#pragma once

#include <stdexcept>
#include <string>

namespace detangle {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input files: CSV cells, schema documents, persisted artifacts.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A value or reference that does not conform to the schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Request or config fields violating their invariants. The message carries
/// the field path of every violation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class EmptyWindowError : public Error {
 public:
  EmptyWindowError() : Error("extraction condition selects no rows (empty target window)") {}
};

/// A row/column/model budget that cannot accommodate the request.
class BudgetError : public Error {
 public:
  using Error::Error;
};

/// Condition support disjoint from the extracted data.
class InfeasibleExtrapolationError : public Error {
 public:
  using Error::Error;
};

/// Numerical preconditions (single-class training data, degenerate sizes, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace detangle
