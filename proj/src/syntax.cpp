#include "syntax.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>

#include "aalguard/error.hpp"

namespace aalguard::syntax {
namespace {

bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '/' ||
           c == '.' || c == '-';
}

bool var_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool digit(char c) { return c >= '0' && c <= '9'; }

constexpr std::string_view kUnicodeArrow = "\xE2\x86\x92";

}  // namespace

std::string_view describe(Tok t) {
    switch (t) {
        case Tok::ident: return "identifier";
        case Tok::variable: return "variable";
        case Tok::string: return "string";
        case Tok::number: return "number";
        case Tok::lparen: return "'('";
        case Tok::rparen: return "')'";
        case Tok::comma: return "','";
        case Tok::caret: return "'^'";
        case Tok::arrow: return "'->'";
        case Tok::dot: return "'.'";
        case Tok::lbrace: return "'{'";
        case Tok::rbrace: return "'}'";
        case Tok::id_line: return "'@id:'";
        case Tok::blank: return "blank line";
        case Tok::end: return "end of input";
    }
    return "?";
}

std::vector<Token> tokenize(std::string_view text, std::size_t first_line) {
    std::vector<Token> out;
    std::size_t line = first_line;
    bool line_has_content = false;
    std::size_t i = 0;

    auto push = [&](Tok kind, std::string value, std::size_t at) {
        out.push_back(Token{kind, std::move(value), at, line});
        line_has_content = true;
    };
    auto error = [&](const std::string& msg, std::size_t at) {
        throw ParseError(msg, line, at);
    };

    while (i < text.size()) {
        const char c = text[i];
        if (c == '\n') {
            if (!line_has_content && !out.empty() && out.back().kind != Tok::blank) {
                out.push_back(Token{Tok::blank, {}, i, line});
            }
            ++line;
            line_has_content = false;
            ++i;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
            ++i;
            continue;
        }
        if (c == '#') {
            line_has_content = true;
            while (i < text.size() && text[i] != '\n') ++i;
            continue;
        }
        const std::size_t start = i;
        if (c == '@') {
            if (text.substr(i, 4) != "@id:") error("expected '@id:'", i);
            i += 4;
            std::size_t end = i;
            while (end < text.size() && text[end] != '\n' && text[end] != '#') ++end;
            std::string label(text.substr(i, end - i));
            while (!label.empty() && std::isspace(static_cast<unsigned char>(label.back())))
                label.pop_back();
            std::size_t lead = 0;
            while (lead < label.size() && std::isspace(static_cast<unsigned char>(label[lead])))
                ++lead;
            label.erase(0, lead);
            if (label.empty()) error("empty rule label", start);
            for (char l : label) {
                if (!(std::isalnum(static_cast<unsigned char>(l)) || l == '_' || l == '-' ||
                      l == '.' || l == ':' || l == '/')) {
                    error("illegal character in rule label", start);
                }
            }
            push(Tok::id_line, std::move(label), start);
            i = end;
            continue;
        }
        if (c == '?') {
            ++i;
            if (i >= text.size() || !ident_start(text[i])) error("malformed variable", start);
            while (i < text.size() && var_char(text[i])) ++i;
            push(Tok::variable, std::string(text.substr(start + 1, i - start - 1)), start);
            continue;
        }
        if (c == '"') {
            ++i;
            std::string value;
            bool closed = false;
            while (i < text.size()) {
                const char s = text[i];
                if (s == '\\' && i + 1 < text.size()) {
                    const char e = text[i + 1];
                    value.push_back(e == 'n' ? '\n' : e == 't' ? '\t' : e);
                    i += 2;
                    continue;
                }
                if (s == '"') {
                    closed = true;
                    ++i;
                    break;
                }
                if (s == '\n') break;
                value.push_back(s);
                ++i;
            }
            if (!closed) error("unterminated string", start);
            push(Tok::string, std::move(value), start);
            continue;
        }
        if (digit(c) || ((c == '-' || c == '+') && i + 1 < text.size() && digit(text[i + 1]))) {
            ++i;
            while (i < text.size() && digit(text[i])) ++i;
            if (i + 1 < text.size() && text[i] == '.' && digit(text[i + 1])) {
                ++i;
                while (i < text.size() && digit(text[i])) ++i;
            }
            if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
                std::size_t j = i + 1;
                if (j < text.size() && (text[j] == '+' || text[j] == '-')) ++j;
                if (j < text.size() && digit(text[j])) {
                    i = j;
                    while (i < text.size() && digit(text[i])) ++i;
                }
            }
            if (i < text.size() && ident_start(text[i])) error("malformed number", start);
            push(Tok::number, std::string(text.substr(start, i - start)), start);
            continue;
        }
        if (c == '-' && i + 1 < text.size() && text[i + 1] == '>') {
            i += 2;
            push(Tok::arrow, "->", start);
            continue;
        }
        if (text.substr(i, kUnicodeArrow.size()) == kUnicodeArrow) {
            i += kUnicodeArrow.size();
            push(Tok::arrow, "->", start);
            continue;
        }
        if (ident_start(c)) {
            ++i;
            while (i < text.size() && ident_char(text[i])) {
                if (text[i] == '-' && i + 1 < text.size() && text[i + 1] == '>') break;
                ++i;
            }
            push(Tok::ident, std::string(text.substr(start, i - start)), start);
            continue;
        }
        Tok single = Tok::end;
        switch (c) {
            case '(': single = Tok::lparen; break;
            case ')': single = Tok::rparen; break;
            case ',': single = Tok::comma; break;
            case '^': single = Tok::caret; break;
            case '.': single = Tok::dot; break;
            case '{': single = Tok::lbrace; break;
            case '}': single = Tok::rbrace; break;
            default: break;
        }
        if (single == Tok::end) error(std::string("unexpected character '") + c + "'", start);
        ++i;
        push(single, std::string(1, c), start);
    }
    out.push_back(Token{Tok::end, {}, text.size(), line});
    return out;
}

const Token& Cursor::peek(std::size_t ahead) const {
    const std::size_t idx = std::min(pos_ + ahead, tokens_.size() - 1);
    return tokens_[idx];
}

const Token& Cursor::next() {
    const Token& t = tokens_[pos_];
    if (pos_ + 1 < tokens_.size()) ++pos_;
    return t;
}

bool Cursor::accept(Tok t) {
    if (!at(t)) return false;
    next();
    return true;
}

const Token& Cursor::expect(Tok t) {
    if (!at(t)) fail("unexpected " + std::string(describe(peek().kind)), {std::string(describe(t))});
    return next();
}

void Cursor::skip_blanks() {
    while (at(Tok::blank)) next();
}

void Cursor::fail(const std::string& message, std::vector<std::string> expected) const {
    const Token& t = peek();
    throw ParseError(message, t.line, t.offset, std::move(expected));
}

kb::Atom Cursor::atom(bool allow_variables) {
    if (!at(Tok::ident)) fail("unexpected " + std::string(describe(peek().kind)), {"predicate"});
    std::string spelled = next().text;
    while (at(Tok::ident)) {
        spelled += ' ';
        spelled += next().text;
    }
    if (is_reserved_builtin(spelled)) {
        fail("unsupported built-in '" + spelled + "'", {});
    }
    kb::Atom atom;
    atom.predicate = kb::canonical_predicate(spelled);
    expect(Tok::lparen);
    atom.terms.push_back(term(allow_variables));
    while (accept(Tok::comma)) {
        atom.terms.push_back(term(allow_variables));
    }
    if (!at(Tok::rparen)) fail("unexpected " + std::string(describe(peek().kind)), {"','", "')'"});
    if (atom.terms.size() > kb::kMaxArity) {
        fail("arity " + std::to_string(atom.terms.size()) + " exceeds " +
                 std::to_string(kb::kMaxArity),
             {});
    }
    next();
    return atom;
}

kb::Term Cursor::term(bool allow_variables) {
    const Token& t = peek();
    switch (t.kind) {
        case Tok::variable:
            if (!allow_variables) fail("variables are not allowed here", {"constant"});
            return kb::Term::var(next().text);
        case Tok::ident:
            return kb::Term::constant(kb::Constant::symbol(next().text));
        case Tok::string:
            return kb::Term::constant(kb::Constant::string(next().text));
        case Tok::number: {
            const std::string spelling = t.text;
            double value = 0.0;
            const char* first = spelling.data() + (spelling.front() == '+' ? 1 : 0);
            auto [ptr, ec] = std::from_chars(first, spelling.data() + spelling.size(), value);
            if (ec != std::errc{} || !std::isfinite(value)) fail("number out of range", {});
            (void)ptr;
            next();
            return kb::Term::constant(kb::Constant::number(value, spelling));
        }
        default:
            break;
    }
    std::vector<std::string> expected{"constant"};
    if (allow_variables) expected.insert(expected.begin(), "variable");
    fail("unexpected " + std::string(describe(t.kind)), std::move(expected));
}

bool is_reserved_builtin(std::string_view predicate) {
    static constexpr std::array<std::string_view, 12> kReserved = {
        "lessthan", "lessthanorequal", "greaterthan", "greaterthanorequal", "equal",
        "notequal", "add", "subtract", "multiply", "divide", "mod", "stringconcat",
    };
    const std::string folded = kb::fold_predicate(kb::canonical_predicate(predicate));
    for (auto r : kReserved) {
        if (folded == r) return true;
    }
    return false;
}

}  // namespace aalguard::syntax
