#pragma once

#include <stdexcept>
#include <string>

namespace mcguard {

// Base for every error the toolkit raises. Callers that only care about
// "something went wrong in mcguard" catch this; the CLI maps it to exit 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed field text (timestamps, MAC addresses, numeric cells).
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::string offending)
        : Error(what + ": '" + offending + "'"), offending_(std::move(offending)) {}

    const std::string& offending() const noexcept { return offending_; }

private:
    std::string offending_;
};

// CSV header lacks a mandatory column, or a column mapping is inconsistent.
class SchemaError : public Error {
public:
    using Error::Error;
};

// A message field cannot be represented in its wire encoding.
class EncodeError : public Error {
public:
    using Error::Error;
};

// API misuse: wrong rule family, misaligned inputs, empty matrices.
class UsageError : public Error {
public:
    using Error::Error;
};

// Invalid scenario specification (colliding injections, bad parameters).
class SpecError : public Error {
public:
    using Error::Error;
};

// Configuration file or flag problem.
class ConfigError : public Error {
public:
    using Error::Error;
};

// An analyst backend replied with something we cannot interpret, or failed.
class BackendProtocolError : public Error {
public:
    using Error::Error;
};

// filterql text that does not match the grammar. position is a 0-based
// character offset into the query text (text length for end of input).
class QuerySyntaxError : public Error {
public:
    QuerySyntaxError(const std::string& what, size_t position)
        : Error(what + " at position " + std::to_string(position)), position_(position) {}

    size_t position() const noexcept { return position_; }

private:
    size_t position_;
};

// A well-formed query whose operand types do not fit together.
class QueryTypeError : public Error {
public:
    QueryTypeError(const std::string& what, std::string subexpression)
        : Error(what + " in '" + subexpression + "'"), subexpression_(std::move(subexpression)) {}

    const std::string& subexpression() const noexcept { return subexpression_; }

private:
    std::string subexpression_;
};

}  // namespace mcguard
