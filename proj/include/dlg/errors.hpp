#pragma once

#include <stdexcept>
#include <string>

namespace dlg {

struct SourceSpan {
    int line = 0;
    int column = 0;
    size_t beginByte = 0;
    size_t endByte = 0;

    bool operator==(const SourceSpan&) const = default;
};

// Base class for all language-level errors raised by the toolkit.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

private:
    std::string code_;
};

class LexError : public Error {
public:
    LexError(const std::string& message, SourceSpan span)
        : Error("LexError", message), span(span) {}
    SourceSpan span;
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, SourceSpan span,
               std::string expected = {}, std::string found = {})
        : Error("ParseError", message), span(span),
          expected(std::move(expected)), found(std::move(found)) {}
    SourceSpan span;
    std::string expected;
    std::string found;
};

class ExecError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

} // namespace dlg
