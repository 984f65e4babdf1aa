#pragma once

#include <stdexcept>
#include <string>

namespace nppx {

enum class ErrorKind {
    Syntax,
    Safety,
    Arity,
    Interval,
    Limit,
    NotFound,
    InvalidArgument,
    Io,
    Conflict,
    Internal,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Syntax error with a 1-based source position.
class ParseError : public Error {
public:
    ParseError(const std::string& message, int line, int column)
        : Error(ErrorKind::Syntax, format(message, line, column)),
          line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    static std::string format(const std::string& message, int line, int column) {
        return std::to_string(line) + ":" + std::to_string(column) + ": " + message;
    }

    int line_;
    int column_;
};

}  // namespace nppx
