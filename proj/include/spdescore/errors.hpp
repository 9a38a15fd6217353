#pragma once

#include <stdexcept>
#include <string>

namespace spdescore {

/// Rejected argument (non-positive length, negative time outside group mode, ...).
class InvalidParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Vector/matrix sizes or basis identifiers do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Matrix fails the symmetry tolerance.
class NotSymmetricError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Matrix has an eigenvalue below the PSD clamp tolerance.
class NotPsdError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Covariance family parameters do not give a finite trace as the mode count grows.
class TraceClassError : public InvalidParameterError {
public:
    using InvalidParameterError::InvalidParameterError;
};

/// Reverse-time step would cross below the configured t_min.
class HorizonError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File or directory cannot be read/written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Config rejection carrying the offending field path (e.g. "q.decay").
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const { return field_; }

private:
    std::string field_;
};

}  // namespace spdescore
