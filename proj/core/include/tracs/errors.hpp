#pragma once

#include <stdexcept>
#include <string>

namespace tracs {

// Base for every error raised by the library. `is_input_error()` separates
// bad input/configuration (CLI exit code 2) from runtime failures (exit 1).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual bool is_input_error() const noexcept { return false; }
};

class InputError : public Error {
public:
    using Error::Error;
    bool is_input_error() const noexcept override { return true; }
};

// Missing column, wrong JSON key, malformed file layout.
class SchemaError : public InputError {
public:
    using InputError::InputError;
};

// Well-formed input that violates a data invariant (duplicate ids, bad cell).
class ValidationError : public InputError {
public:
    using InputError::InputError;
};

// Out-of-range or inconsistent configuration values.
class ConfigError : public InputError {
public:
    using InputError::InputError;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Non-finite values in the model or loss.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace tracs
