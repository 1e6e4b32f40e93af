#pragma once

#include <stdexcept>
#include <string>

namespace siren {

// Error families map onto CLI exit codes: ConfigError/DependencyError -> 1,
// DataError -> 2, NumericError -> 3. InputError is a caller contract
// violation (wrong dimension, mismatched lengths) and exits with 1.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DependencyError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : DataError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class SchemaError : public DataError {
public:
    using DataError::DataError;
};

// Too few distinct points for the requested number of centroids.
class DegenerateError : public InputError {
public:
    using InputError::InputError;
};

class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace siren
