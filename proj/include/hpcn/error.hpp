#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hpcn {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numeric argument is outside its documented domain.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// A precondition on a structured input (symmetry, sizes) does not hold.
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Every prior eigenvalue is zero, so energy fractions are undefined.
class DegeneratePriorError : public Error {
public:
    using Error::Error;
};

/// The adaptive proposal covariance cannot be factorized or is not ready.
class AdaptationError : public Error {
public:
    using Error::Error;
};

/// The sampler configuration is inconsistent with the prior (e.g. J too large).
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// A chain could not start (e.g. too few pre-run states pass the norm gate).
class StartupError : public Error {
public:
    using Error::Error;
};

/// A statistic is undefined for the given input (zero-variance series).
class UndefinedStatistic : public Error {
public:
    using Error::Error;
};

/// Malformed config file; carries the 1-based line number.
class ConfigParseError : public Error {
public:
    ConfigParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A config value failed validation; carries the offending key.
class ValidationError : public Error {
public:
    ValidationError(std::string key, const std::string& what)
        : Error(key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

}  // namespace hpcn
