#pragma once

#include <stdexcept>
#include <string>

namespace quadpost {

// Base class for all errors raised by the engine.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : Error {
    using Error::Error;
};

struct NonFinite : Error {
    using Error::Error;
};

struct InvalidInterval : Error {
    using Error::Error;
};

struct BisectionFailure : Error {
    using Error::Error;
};

struct EigenFailure : Error {
    using Error::Error;
};

struct NonPositiveVariance : Error {
    using Error::Error;
};

struct SingularMatrix : Error {
    using Error::Error;
};

struct NonPositiveScale : Error {
    using Error::Error;
};

struct MissingCovariance : Error {
    using Error::Error;
};

struct GridTooCoarse : Error {
    using Error::Error;
};

struct InvalidConfig : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace quadpost
