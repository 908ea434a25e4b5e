#pragma once

#include <stdexcept>
#include <string>

namespace photocal {

// Error taxonomy used across the library. The CLI maps these onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside its documented domain (e.g. intensity not in [0,255]).
class DomainError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent input data (missing records, bad values).
class DataError : public Error {
public:
    using Error::Error;
};

// Byte-level format violation in a file; message carries the location.
class FormatError : public Error {
public:
    using Error::Error;
};

// Operation invoked in a state that does not permit it.
class StateError : public Error {
public:
    using Error::Error;
};

// Frames fed out of order.
class SequenceError : public Error {
public:
    using Error::Error;
};

// Estimator does not yet have enough data.
class NotReadyError : public Error {
public:
    using Error::Error;
};

// The requested quantity cannot be recovered from the given data
// (degenerate exposure schedule, no radial motion, ...).
class UnobservableError : public Error {
public:
    using Error::Error;
};

// Model evaluates to a physically invalid value (e.g. vignette <= 0).
class ModelError : public Error {
public:
    using Error::Error;
};

// Synthetic scene generation violated its own constraints.
class GenerationError : public Error {
public:
    using Error::Error;
};

// Trajectory alignment impossible (too few / collinear correspondences).
class AlignmentError : public Error {
public:
    using Error::Error;
};

// Residual evaluation produced no valid terms.
class EmptyResidualError : public Error {
public:
    using Error::Error;
};

}  // namespace photocal
