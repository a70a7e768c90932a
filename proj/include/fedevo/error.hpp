#pragma once

#include <stdexcept>
#include <string>

namespace fedevo {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Cholesky factorization failed: the covariance is not numerically positive definite.
class DegenerateCovariance : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A sample with NaN/Inf components was offered to a model.
class RejectedSample : public Error {
public:
    using Error::Error;
};

class EmptyModel : public Error {
public:
    using Error::Error;
};

class ClassMismatch : public Error {
public:
    using Error::Error;
};

/// Malformed snapshot or data file.
class SchemaError : public Error {
public:
    using Error::Error;
};

class IncompatibleSnapshots : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace fedevo
