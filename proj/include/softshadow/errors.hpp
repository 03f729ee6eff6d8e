#pragma once

#include <stdexcept>
#include <string>

namespace softshadow {

// Every library failure derives from Error so callers can catch one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file or byte stream.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Input parses but carries no usable geometry.
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

class InvalidParameterError : public Error {
public:
    using Error::Error;
};

/// Image or grid dimensions do not agree.
class GeometryError : public Error {
public:
    using Error::Error;
};

/// Inverse/radiance shadow domains were mixed.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A metric is undefined for the given input (e.g. zero variance).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

class BoundsError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// A required layer or resource is missing.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// The resource exists but is not ready yet; the caller should retry later.
class NotReadyError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Long-running work stopped at the caller's request.
class CancelledError : public Error {
public:
    using Error::Error;
};

} // namespace softshadow
