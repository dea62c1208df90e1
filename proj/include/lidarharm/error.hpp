#pragma once

#include <stdexcept>
#include <string>

namespace lidarharm {

/// Base for every error the library raises. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or truncated file content (scan, curve, dataset, checkpoint).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Argument outside the domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Configuration key/value problems.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace lidarharm
