#include "dlg/lexer.hpp"

#include <cctype>

namespace dlg {

namespace {

bool isIdentStart(char c) { return std::isalpha((unsigned char)c) || c == '_'; }
bool isIdentChar(char c) { return std::isalnum((unsigned char)c) || c == '_'; }

class Lexer {
public:
    explicit Lexer(const std::string& text) : text_(text) {}

    std::vector<Token> run() {
        std::vector<Token> tokens;
        for (;;) {
            skipWhitespaceAndComments();
            if (pos_ >= text_.size())
                break;
            tokens.push_back(next());
        }
        Token eof;
        eof.kind = TokenKind::EndOfInput;
        eof.span = spanFrom(pos_);
        tokens.push_back(eof);
        return tokens;
    }

private:
    const std::string& text_;
    size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;

    char peek(size_t off = 0) const {
        return pos_ + off < text_.size() ? text_[pos_ + off] : '\0';
    }

    void advance(size_t n = 1) {
        for (size_t i = 0; i < n && pos_ < text_.size(); i++, pos_++) {
            if (text_[pos_] == '\n') {
                line_++;
                col_ = 1;
            } else {
                col_++;
            }
        }
    }

    SourceSpan spanFrom(size_t begin) const {
        SourceSpan s;
        s.beginByte = begin;
        s.endByte = pos_;
        s.line = line_;
        s.column = col_;
        return s;
    }

    void skipWhitespaceAndComments() {
        for (;;) {
            while (pos_ < text_.size() && std::isspace((unsigned char)peek()))
                advance();
            if (peek() == '/' && peek(1) == '/') {
                while (pos_ < text_.size() && peek() != '\n')
                    advance();
                continue;
            }
            break;
        }
    }

    Token make(TokenKind kind, size_t begin) {
        Token t;
        t.kind = kind;
        t.lexeme = text_.substr(begin, pos_ - begin);
        t.span = spanFrom(begin);
        t.span.line = startLine_;
        t.span.column = startCol_;
        return t;
    }

    int startLine_ = 1, startCol_ = 1;

    Token next() {
        size_t begin = pos_;
        startLine_ = line_;
        startCol_ = col_;
        char c = peek();

        if (c == '@') {
            advance();
            if (!isIdentStart(peek()))
                throw LexError("expected identifier after '@'", spanFrom(begin));
            while (isIdentChar(peek()))
                advance();
            while (peek() == '.' && isIdentStart(peek(1))) {
                advance();
                while (isIdentChar(peek()))
                    advance();
            }
            Token t = make(TokenKind::DnsName, begin);
            t.lexeme.erase(0, 1);
            return t;
        }

        if (c == '$') {
            advance();
            if (peek() == '?') {
                advance();
                return make(TokenKind::EnvConst, begin);
            }
            if (!isIdentStart(peek()))
                throw LexError("expected identifier or '?' after '$'", spanFrom(begin));
            while (isIdentChar(peek()))
                advance();
            Token t = make(TokenKind::EnvConst, begin);
            if (t.lexeme != "$here" && t.lexeme != "$now")
                throw LexError("unknown environment constant " + t.lexeme, t.span);
            return t;
        }

        if (std::isdigit((unsigned char)c) || (c == '-' && std::isdigit((unsigned char)peek(1))))
            return numberLike(begin);

        if (isIdentStart(c)) {
            while (isIdentChar(peek()))
                advance();
            return make(TokenKind::Identifier, begin);
        }

        if (c == '"')
            return quotedString(begin);

        // Multi-char operators first.
        static const char* ops2[] = {"==", ">=", "<=", "=>", "&&", "||", "^^", "#_"};
        for (const char* op : ops2) {
            if (c == op[0] && peek(1) == op[1]) {
                advance(2);
                return make(TokenKind::Punct, begin);
            }
        }
        static const std::string singles = "()[]{},;:=!.#";
        if (singles.find(c) != std::string::npos) {
            advance();
            return make(TokenKind::Punct, begin);
        }

        advance();
        throw LexError(std::string("stray character '") + c + "'", spanFrom(begin));
    }

    Token numberLike(size_t begin) {
        if (peek() == '-')
            advance();
        size_t digitsBegin = pos_;
        while (std::isdigit((unsigned char)peek()))
            advance();
        // ISO date: yyyy-mm-dd with optional Thh:mm[:ss].
        if (pos_ - digitsBegin == 4 && peek() == '-' && std::isdigit((unsigned char)peek(1))) {
            advance();
            while (std::isdigit((unsigned char)peek()))
                advance();
            if (peek() != '-')
                throw LexError("malformed date literal", spanFrom(begin));
            advance();
            while (std::isdigit((unsigned char)peek()))
                advance();
            if (peek() == 'T') {
                advance();
                while (std::isdigit((unsigned char)peek()) || peek() == ':')
                    advance();
            }
            return make(TokenKind::DateLit, begin);
        }
        if (peek() == '.' && std::isdigit((unsigned char)peek(1))) {
            advance();
            while (std::isdigit((unsigned char)peek()))
                advance();
        }
        if ((peek() == 'e' || peek() == 'E') &&
            (std::isdigit((unsigned char)peek(1)) ||
             ((peek(1) == '+' || peek(1) == '-') && std::isdigit((unsigned char)peek(2))))) {
            advance();
            if (peek() == '+' || peek() == '-')
                advance();
            while (std::isdigit((unsigned char)peek()))
                advance();
        }
        size_t numEnd = pos_;
        if (isIdentStart(peek())) {
            // Measure or currency literal: 5km, 21C, 100USD.
            while (isIdentChar(peek()))
                advance();
            Token t = make(TokenKind::MeasureLit, begin);
            t.numText = text_.substr(begin, numEnd - begin);
            t.suffix = text_.substr(numEnd, pos_ - numEnd);
            return t;
        }
        return make(TokenKind::Number, begin);
    }

    Token quotedString(size_t begin) {
        advance();  // opening quote
        std::string value;
        while (pos_ < text_.size() && peek() != '"') {
            char c = peek();
            if (c == '\\') {
                advance();
                char esc = peek();
                switch (esc) {
                case '"': value += '"'; break;
                case '\\': value += '\\'; break;
                case 'n': value += '\n'; break;
                case 't': value += '\t'; break;
                default:
                    throw LexError("unknown escape sequence", spanFrom(begin));
                }
                advance();
                continue;
            }
            value += c;
            advance();
        }
        if (pos_ >= text_.size())
            throw LexError("unterminated string literal", spanFrom(begin));
        advance();  // closing quote
        Token t = make(TokenKind::QuotedString, begin);
        t.lexeme = value;  // unescaped content
        return t;
    }
};

} // namespace

std::vector<Token> tokenize(const std::string& text) {
    return Lexer(text).run();
}

} // namespace dlg
