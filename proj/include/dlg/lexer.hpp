#pragma once

#include <string>
#include <vector>

#include "dlg/errors.hpp"

namespace dlg {

enum class TokenKind {
    Identifier,
    DnsName,   // @a.b.c (leading @ stripped from lexeme)
    Number,
    MeasureLit,  // number immediately followed by a unit/currency suffix
    QuotedString,
    DateLit,  // ISO-8601: 2020-01-02 or 2020-01-02T10:30[:00]
    Punct,    // operators and punctuation, lexeme holds the spelling
    EnvConst, // $here, $now, $? (lexeme includes the $)
    EndOfInput,
};

struct Token {
    TokenKind kind = TokenKind::EndOfInput;
    std::string lexeme;  // for MeasureLit: "<number>|<suffix>" split via numText/suffix
    std::string numText; // MeasureLit: numeric part
    std::string suffix;  // MeasureLit: unit / currency suffix
    SourceSpan span;
};

// Whole-input tokenizer; throws LexError on stray bytes or unterminated strings.
std::vector<Token> tokenize(const std::string& text);

} // namespace dlg
