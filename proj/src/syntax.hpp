#pragma once

// Tokenizer and atom-level parser shared by the fact, rule and query formats.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "aalguard/kb.hpp"

namespace aalguard::syntax {

enum class Tok {
    ident,     // symbol or keyword
    variable,  // ?name
    string,    // "quoted"
    number,
    lparen,
    rparen,
    comma,
    caret,
    arrow,     // -> or the typographic arrow
    dot,
    lbrace,
    rbrace,
    id_line,   // @id: label   (text holds the label)
    blank,     // an empty line
    end,
};

std::string_view describe(Tok t);

struct Token {
    Tok kind = Tok::end;
    std::string text;
    std::size_t offset = 0;
    std::size_t line = 1;
};

// Throws ParseError on an illegal character or unterminated string.
std::vector<Token> tokenize(std::string_view text, std::size_t first_line = 1);

class Cursor {
public:
    explicit Cursor(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    const Token& peek(std::size_t ahead = 0) const;
    const Token& next();
    bool at(Tok t) const { return peek().kind == t; }
    bool accept(Tok t);
    const Token& expect(Tok t);
    void skip_blanks();

    [[noreturn]] void fail(const std::string& message, std::vector<std::string> expected) const;

    // atom := predicate "(" term { "," term } ")"
    // A predicate may be several words before the parenthesis ("has Access").
    kb::Atom atom(bool allow_variables);

private:
    kb::Term term(bool allow_variables);

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

// Reserved comparison / arithmetic built-ins that the rule language rejects.
bool is_reserved_builtin(std::string_view predicate);

}  // namespace aalguard::syntax
