#pragma once

#include <stdexcept>
#include <string>

namespace scnoise {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Syntax and validation failures; line/column are 1-based.
class ParseError : public Error {
public:
    ParseError(int line, int column, const std::string& what)
        : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
          line_(line), column_(column), message_(what) {}

    int line() const { return line_; }
    int column() const { return column_; }
    const std::string& message() const { return message_; }

private:
    int line_;
    int column_;
    std::string message_;
};

class AnalysisError : public Error {
public:
    using Error::Error;
};

}  // namespace scnoise
