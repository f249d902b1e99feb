#include "aalguard/kb.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "aalguard/error.hpp"
#include "syntax.hpp"

namespace aalguard::kb {
namespace {

// Ontology relations with a fixed canonical spelling.
constexpr std::array<std::string_view, 18> kVocabulary = {
    "HasCapability",   "HasActivity",        "HasLocation",   "HasTime",
    "HasRecognizedBehavior", "BehaviorCapability", "AskedService", "UsedDevice",
    "HasContext",      "Authenticated",      "Authentication", "hasAccess",
    "Username",        "Password",           "TrustValue",    "PriorityValue",
    "Obligation",      "Recommendation",
};

std::string shortest(double value) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    (void)ec;
    return std::string(buf.data(), ptr);
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

}  // namespace

bool Constant::is_symbol_text(std::string_view text) noexcept {
    if (text.empty()) return false;
    const auto first = static_cast<unsigned char>(text.front());
    if (!(std::isalpha(first) || text.front() == '_')) return false;
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (!(std::isalnum(u) || c == '_' || c == '/' || c == '.' || c == '-')) return false;
    }
    // "a->b" would re-tokenize as an arrow.
    return text.find("->") == std::string_view::npos;
}

Constant Constant::symbol(std::string text) {
    if (!is_symbol_text(text)) throw ValidationError("illegal symbol '" + text + "'");
    Constant c;
    c.kind_ = Kind::symbol;
    c.text_ = std::move(text);
    return c;
}

Constant Constant::string(std::string text) {
    Constant c;
    c.kind_ = Kind::string;
    c.text_ = std::move(text);
    return c;
}

Constant Constant::number(double value, std::string spelling) {
    if (!std::isfinite(value)) throw ValidationError("numbers must be finite");
    Constant c;
    c.kind_ = Kind::number;
    c.number_ = value;
    c.text_ = spelling.empty() ? shortest(value) : std::move(spelling);
    return c;
}

Constant Constant::from_text(std::string text) {
    if (is_symbol_text(text)) return symbol(std::move(text));
    return string(std::move(text));
}

std::string Constant::to_source() const {
    switch (kind_) {
        case Kind::symbol: return text_;
        case Kind::string: return quote(text_);
        case Kind::number: return text_;
    }
    return text_;
}

bool operator==(const Constant& a, const Constant& b) noexcept {
    if (a.is_number() != b.is_number()) return false;
    if (a.is_number()) return a.number_ == b.number_;
    return a.text_ == b.text_;
}

bool operator<(const Constant& a, const Constant& b) noexcept {
    if (a.is_number() != b.is_number()) return !a.is_number();
    if (a.is_number()) return a.number_ < b.number_;
    return a.text_ < b.text_;
}

Term Term::var(std::string name) {
    Term t;
    t.kind = Kind::variable;
    t.variable = std::move(name);
    return t;
}

std::string Term::to_source() const {
    return is_variable() ? "?" + variable : value.to_source();
}

bool Term::identical(const Term& other) const noexcept {
    if (kind != other.kind) return false;
    return is_variable() ? variable == other.variable : value.identical(other.value);
}

std::string Atom::to_source() const {
    std::string out = predicate + "(";
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (i) out += ", ";
        out += terms[i].to_source();
    }
    return out + ")";
}

bool Atom::identical(const Atom& other) const noexcept {
    if (predicate != other.predicate || terms.size() != other.terms.size()) return false;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (!terms[i].identical(other.terms[i])) return false;
    }
    return true;
}

std::string Fact::to_source() const {
    std::string out = predicate + "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) out += ", ";
        out += args[i].to_source();
    }
    return out + ")";
}

bool Fact::same_as(const Fact& other) const noexcept {
    return fold_predicate(predicate) == fold_predicate(other.predicate) && args == other.args;
}

std::string fold_predicate(std::string_view predicate) {
    std::string out;
    out.reserve(predicate.size());
    for (char c : predicate) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

std::string canonical_predicate(std::string_view spelled) {
    std::string joined;
    joined.reserve(spelled.size());
    for (char c : spelled) {
        if (!std::isspace(static_cast<unsigned char>(c))) joined.push_back(c);
    }
    const std::string folded = fold_predicate(joined);
    for (auto known : kVocabulary) {
        if (fold_predicate(known) == folded) return std::string(known);
    }
    return joined;
}

void check_arity(std::string_view predicate, std::size_t arity) {
    if (arity == 0 || arity > kMaxArity) {
        throw ArityError("predicate '" + std::string(predicate) + "' has arity " +
                         std::to_string(arity) + "; expected 1.." + std::to_string(kMaxArity));
    }
}

FactStore::Table& FactStore::table_for(const std::string& canonical) {
    auto [it, inserted] = tables_.try_emplace(fold_predicate(canonical));
    if (inserted) it->second.spelling = canonical;
    return it->second;
}

bool FactStore::assert_fact(Fact fact) {
    check_arity(fact.predicate, fact.args.size());
    Table& table = table_for(canonical_predicate(fact.predicate));
    auto it = table.rows.find(fact.args);
    if (it != table.rows.end()) {
        StoredFact& existing = it->second;
        if (existing.fact.origin == Origin::inferred) {
            existing.fact.origin = Origin::asserted;
            existing.fact.rule_id.reset();
            existing.premises.clear();
        }
        return false;
    }
    fact.predicate = table.spelling;
    fact.origin = Origin::asserted;
    fact.rule_id.reset();
    auto args = fact.args;
    table.rows.emplace(std::move(args), StoredFact{std::move(fact), next_seq_++, {}});
    ++size_;
    return true;
}

bool FactStore::add_inferred(Fact fact, std::string rule_id, std::vector<Fact> premises) {
    check_arity(fact.predicate, fact.args.size());
    Table& table = table_for(canonical_predicate(fact.predicate));
    if (table.rows.count(fact.args)) return false;
    fact.predicate = table.spelling;
    fact.origin = Origin::inferred;
    fact.rule_id = std::move(rule_id);
    auto args = fact.args;
    table.rows.emplace(std::move(args),
                       StoredFact{std::move(fact), next_seq_++, std::move(premises)});
    ++size_;
    return true;
}

bool FactStore::retract_fact(std::string_view predicate, const std::vector<Constant>& args) {
    auto t = tables_.find(fold_predicate(canonical_predicate(predicate)));
    if (t == tables_.end()) return false;
    if (t->second.rows.erase(args) == 0) return false;
    --size_;
    return true;
}

bool FactStore::contains(std::string_view predicate, const std::vector<Constant>& args) const {
    return find(predicate, args) != nullptr;
}

const StoredFact* FactStore::find(std::string_view predicate,
                                  const std::vector<Constant>& args) const {
    auto t = tables_.find(fold_predicate(canonical_predicate(predicate)));
    if (t == tables_.end()) return nullptr;
    auto r = t->second.rows.find(args);
    return r == t->second.rows.end() ? nullptr : &r->second;
}

std::vector<const StoredFact*> FactStore::with_predicate(std::string_view predicate) const {
    std::vector<const StoredFact*> out;
    auto t = tables_.find(fold_predicate(canonical_predicate(predicate)));
    if (t == tables_.end()) return out;
    out.reserve(t->second.rows.size());
    for (const auto& [args, stored] : t->second.rows) out.push_back(&stored);
    std::sort(out.begin(), out.end(),
              [](const StoredFact* a, const StoredFact* b) { return a->seq < b->seq; });
    return out;
}

std::vector<const StoredFact*> FactStore::all() const {
    std::vector<const StoredFact*> out;
    out.reserve(size_);
    for (const auto& [key, table] : tables_) {
        for (const auto& [args, stored] : table.rows) out.push_back(&stored);
    }
    std::sort(out.begin(), out.end(),
              [](const StoredFact* a, const StoredFact* b) { return a->seq < b->seq; });
    return out;
}

std::vector<Fact> FactStore::facts() const {
    std::vector<Fact> out;
    for (const StoredFact* s : all()) out.push_back(s->fact);
    return out;
}

std::string FactStore::spelling(std::string_view predicate) const {
    const std::string canonical = canonical_predicate(predicate);
    auto t = tables_.find(fold_predicate(canonical));
    return t == tables_.end() ? canonical : t->second.spelling;
}

Atom substitute(const Atom& pattern, const Bindings& bindings) {
    Atom out = pattern;
    for (Term& t : out.terms) {
        if (!t.is_variable()) continue;
        auto it = bindings.find(t.variable);
        if (it != bindings.end()) t = Term::constant(it->second);
    }
    return out;
}

bool unify(const Atom& pattern, const std::vector<Constant>& args, Bindings& bindings) {
    if (pattern.terms.size() != args.size()) return false;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const Term& t = pattern.terms[i];
        if (!t.is_variable()) {
            if (!(t.value == args[i])) return false;
            continue;
        }
        auto [it, inserted] = bindings.try_emplace(t.variable, args[i]);
        if (!inserted && !(it->second == args[i])) return false;
    }
    return true;
}

std::vector<Bindings> match_pattern(const FactStore& store, const Atom& pattern) {
    std::vector<Bindings> out;
    bool ground = true;
    std::vector<Constant> key;
    for (const Term& t : pattern.terms) {
        if (t.is_variable()) {
            ground = false;
            break;
        }
        key.push_back(t.value);
    }
    if (ground) {
        if (store.contains(pattern.predicate, key)) out.emplace_back();
        return out;
    }
    for (const StoredFact* s : store.with_predicate(pattern.predicate)) {
        Bindings b;
        if (unify(pattern, s->fact.args, b)) out.push_back(std::move(b));
    }
    return out;
}

FactStore load_facts(std::string_view text) {
    FactStore store;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        const std::string_view line = text.substr(pos, eol - pos);
        ++line_no;

        // Split code from comment, ignoring '#' inside strings.
        std::size_t hash = std::string_view::npos;
        bool in_string = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (in_string && line[i] == '\\') {
                ++i;
                continue;
            }
            if (line[i] == '"') in_string = !in_string;
            if (!in_string && line[i] == '#') {
                hash = i;
                break;
            }
        }
        const std::string code = trim(line.substr(0, hash));
        const std::string comment = hash == std::string_view::npos ? "" : trim(line.substr(hash + 1));

        if (!code.empty()) {
            syntax::Cursor cur(syntax::tokenize(code, line_no));
            Atom atom = cur.atom(false);
            if (!cur.at(syntax::Tok::dot)) cur.fail("missing trailing period", {"'.'"});
            cur.next();
            if (!cur.at(syntax::Tok::end)) cur.fail("trailing input after fact", {"end of line"});

            Fact fact;
            fact.predicate = atom.predicate;
            for (Term& t : atom.terms) fact.args.push_back(std::move(t.value));

            if (comment.rfind("inferred", 0) == 0) {
                std::string rule;
                std::istringstream rest(comment.substr(8));
                std::string word;
                if (rest >> word && word == "by") rest >> rule;
                store.add_inferred(std::move(fact), rule, {});
            } else {
                store.assert_fact(std::move(fact));
            }
        }
        if (eol == text.size()) break;
        pos = eol + 1;
    }
    return store;
}

std::string save_facts(const FactStore& store) {
    std::string out;
    for (const StoredFact* s : store.all()) {
        out += s->fact.to_source();
        out += '.';
        if (s->fact.origin == Origin::inferred) {
            out += " # inferred";
            if (s->fact.rule_id && !s->fact.rule_id->empty()) out += " by " + *s->fact.rule_id;
        }
        out += '\n';
    }
    return out;
}

FactStore load_facts_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open fact file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return load_facts(buf.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.detail(), e.line(), e.offset(), e.expected());
    }
}

void save_facts_file(const FactStore& store, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write fact file '" + path + "'");
    out << save_facts(store);
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace aalguard::kb
