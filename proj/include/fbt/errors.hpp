#pragma once

#include <stdexcept>
#include <string>

namespace fbt {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the documented domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Disorder realization and lattice spec disagree on sizes.
class SizeMismatchError : public Error {
public:
    using Error::Error;
};

/// Dense oracle asked to handle more than its configured dimension cap.
class SizeLimitError : public Error {
public:
    using Error::Error;
};

/// Fewer than two surviving B atoms: no compact flat-band segments exist.
class DegenerateConfigurationError : public Error {
public:
    using Error::Error;
};

/// Iteration or quadrature failed to reach its tolerance.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// State support wraps too far around the ring for positions to be unwrapped.
class GeometryError : public Error {
public:
    using Error::Error;
};

/// Invalid run configuration; `key_path()` names the offending dotted key.
class ConfigError : public Error {
public:
    ConfigError(std::string key_path, const std::string& what)
        : Error(key_path + ": " + what), key_path_(std::move(key_path)) {}
    const std::string& key_path() const { return key_path_; }

private:
    std::string key_path_;
};

}  // namespace fbt
