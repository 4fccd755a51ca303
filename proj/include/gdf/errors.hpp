#pragma once

#include <stdexcept>
#include <string>

namespace gdf {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes or lengths do not conform.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf produced or a training run diverged.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data files.
class DataError : public Error {
public:
    using Error::Error;
};

} // namespace gdf
