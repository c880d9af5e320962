#pragma once

#include <stdexcept>
#include <string>

namespace gaussify {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mode count or cutoff mismatch between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A parameter outside its documented domain (eta, theta, lambda, mode id, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

class NotHermitianError : public Error {
public:
    using Error::Error;
};

/// Vanishing normalisation, singular matrices, failed reductions.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Request would materialise an operator beyond the configured size guard.
class ResourceError : public Error {
public:
    using Error::Error;
};

} // namespace gaussify
