#pragma once

#include <stdexcept>
#include <string>

namespace overview {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input text (JSON, config files, CLI arguments).
class ParseError : public Error {
public:
    using Error::Error;
};

// Well-formed input missing a required field or with a wrong type.
class SchemaError : public Error {
public:
    SchemaError(std::string field, const std::string& message)
        : Error(message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Invalid configuration detected before a run starts.
class ConfigError : public Error {
public:
    using Error::Error;
};

class TransportError : public Error {
public:
    TransportError(const std::string& message, int status = 0)
        : Error(message), status_(status) {}

    // HTTP status of the last attempt, 0 when no response was received.
    int status() const noexcept { return status_; }

private:
    int status_;
};

class AuthError : public Error {
public:
    using Error::Error;
};

class CancelledError : public Error {
public:
    using Error::Error;
};

enum class SelectionErrorKind { NoAnswerPattern, WrongCount, DuplicateId, IdOutOfRange };

// Judge output that does not carry a usable selection.
class SelectionParseError : public ParseError {
public:
    SelectionParseError(SelectionErrorKind kind, const std::string& message, std::string raw)
        : ParseError(message), kind_(kind), raw_(std::move(raw)) {}

    SelectionErrorKind kind() const noexcept { return kind_; }
    const std::string& raw() const noexcept { return raw_; }

private:
    SelectionErrorKind kind_;
    std::string raw_;
};

} // namespace overview
