#pragma once

#include <stdexcept>
#include <string>

namespace bdarch {

/// Raised when a value falls outside the support of a transform or density.
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Raised for invalid model, covariate, partition or CLI configuration.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when the sampler cannot find a finite starting point.
class InitializationError : public std::runtime_error {
public:
    explicit InitializationError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised for malformed input files; the message names the file and line.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bdarch
