#pragma once

#include <stdexcept>
#include <string>

namespace cfmimo {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Configuration or input-validation failure (CLI exit code 1).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failure during a computation (CLI exit code 2).
class NumericalError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NotPositiveDefinite : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ZeroVector : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class InvalidConfig : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class InvalidParameter : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class NonPositiveDistance : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class InvalidFraction : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class InsufficientRealizations : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class DegenerateDenominator : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ZeroSignalDirection : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NonConvergence : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace cfmimo
