#pragma once

#include <stdexcept>
#include <string>

namespace trajkit {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A required column is missing or a file does not follow the expected layout.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A cell failed to parse; the message carries the 1-based line number.
class ParseError : public Error {
public:
    using Error::Error;
};

/// The input contains no data rows.
class EmptyInputError : public Error {
public:
    using Error::Error;
};

/// Too few distinct time points to build a spline basis.
/// Inside the k-means loop this is a cluster-drop trigger, not a fatal error.
class InsufficientSupportError : public Error {
public:
    using Error::Error;
};

/// The penalized least-squares system could not be solved, or smoothing
/// selection found no usable candidate. Also a cluster-drop trigger.
class FitFailureError : public Error {
public:
    using Error::Error;
};

} // namespace trajkit
