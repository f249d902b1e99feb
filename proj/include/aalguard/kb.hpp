#pragma once

// Ground-fact knowledge base for the user / device / service / environment /
// security-policy ontology. Every ontology relation is a predicate over one to
// three constants; facts are either asserted or inferred by the rule engine.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aalguard::kb {

inline constexpr std::size_t kMaxArity = 3;

class Constant {
public:
    enum class Kind { symbol, string, number };

    Constant() = default;

    // Throws ValidationError when the text is not a legal symbol.
    static Constant symbol(std::string text);
    static Constant string(std::string text);
    // `spelling` keeps the source form (e.g. "30.0"); empty means shortest repr.
    static Constant number(double value, std::string spelling = {});
    // Symbol when the text is a legal symbol, quoted string otherwise.
    static Constant from_text(std::string text);

    static bool is_symbol_text(std::string_view text) noexcept;

    Kind kind() const noexcept { return kind_; }
    bool is_number() const noexcept { return kind_ == Kind::number; }
    // Symbol value, unquoted string value, or the number's spelling.
    const std::string& text() const noexcept { return text_; }
    double number_value() const noexcept { return number_; }

    // Rule-language source form: bare symbol, quoted/escaped string, number.
    std::string to_source() const;

    // Value equality: symbols and strings with the same text are equal.
    friend bool operator==(const Constant& a, const Constant& b) noexcept;
    friend bool operator<(const Constant& a, const Constant& b) noexcept;

    // Kind and spelling identical; used for structural round-trip checks.
    bool identical(const Constant& other) const noexcept {
        return kind_ == other.kind_ && text_ == other.text_;
    }

private:
    Kind kind_ = Kind::symbol;
    std::string text_;
    double number_ = 0.0;
};

struct Term {
    enum class Kind { variable, constant };

    Kind kind = Kind::constant;
    std::string variable;  // name without the leading '?'
    Constant value;

    static Term var(std::string name);
    static Term constant(Constant c) { return Term{Kind::constant, {}, std::move(c)}; }

    bool is_variable() const noexcept { return kind == Kind::variable; }
    std::string to_source() const;
    bool identical(const Term& other) const noexcept;
};

struct Atom {
    std::string predicate;
    std::vector<Term> terms;

    std::string to_source() const;
    bool identical(const Atom& other) const noexcept;
};

enum class Origin { asserted, inferred };

struct Fact {
    std::string predicate;
    std::vector<Constant> args;
    Origin origin = Origin::asserted;
    std::optional<std::string> rule_id;

    static Fact make(std::string predicate, std::vector<Constant> args) {
        return Fact{std::move(predicate), std::move(args), Origin::asserted, std::nullopt};
    }

    std::string to_source() const;  // `Pred(a, "b")`, without trailing period
    bool same_as(const Fact& other) const noexcept;  // predicate + args, origin-insensitive
};

using Bindings = std::map<std::string, Constant>;

// Case-folded key used for all predicate comparisons.
std::string fold_predicate(std::string_view predicate);

// Joins whitespace-separated words ("has Access" -> "hasAccess") and maps
// known ontology relations to their canonical spelling regardless of case.
// Unknown predicates come back joined but otherwise unchanged.
std::string canonical_predicate(std::string_view spelled);

// Throws ArityError for 0 or more than kMaxArity arguments.
void check_arity(std::string_view predicate, std::size_t arity);

struct StoredFact {
    Fact fact;
    std::uint64_t seq = 0;  // insertion order, strictly increasing per store
    std::vector<Fact> premises;  // first derivation, inferred facts only
};

class FactStore {
public:
    // True iff the fact was not present. Re-asserting an inferred fact
    // upgrades it to asserted and drops its justification.
    bool assert_fact(Fact fact);

    // Engine entry point: records origin=inferred with rule id and premises.
    // Returns false (and keeps the existing record) when already present.
    bool add_inferred(Fact fact, std::string rule_id, std::vector<Fact> premises);

    bool retract_fact(std::string_view predicate, const std::vector<Constant>& args);

    bool contains(std::string_view predicate, const std::vector<Constant>& args) const;
    const StoredFact* find(std::string_view predicate,
                           const std::vector<Constant>& args) const;

    // Facts of one predicate in insertion order.
    std::vector<const StoredFact*> with_predicate(std::string_view predicate) const;
    // All facts in insertion order.
    std::vector<const StoredFact*> all() const;
    std::vector<Fact> facts() const;

    std::size_t size() const noexcept { return size_; }
    bool empty() const noexcept { return size_ == 0; }

    // First-seen spelling of a predicate in this store.
    std::string spelling(std::string_view predicate) const;

private:
    struct Table {
        std::string spelling;
        std::map<std::vector<Constant>, StoredFact> rows;
    };

    Table& table_for(const std::string& canonical);

    std::map<std::string, Table> tables_;
    std::size_t size_ = 0;
    std::uint64_t next_seq_ = 1;
};

// Apply bindings to an atom; unbound variables stay variables.
Atom substitute(const Atom& pattern, const Bindings& bindings);

// Extend `bindings` so that `pattern` matches `args`; false on clash.
bool unify(const Atom& pattern, const std::vector<Constant>& args, Bindings& bindings);

// Every binding of the pattern's variables that yields a stored fact,
// in fact insertion order.
std::vector<Bindings> match_pattern(const FactStore& store, const Atom& pattern);

// Fact File Format: `Predicate(arg1, arg2).` per line, `#` comments, an
// `# inferred [by <rule>]` trailer marks inferred facts.
FactStore load_facts(std::string_view text);
std::string save_facts(const FactStore& store);

FactStore load_facts_file(const std::string& path);
void save_facts_file(const FactStore& store, const std::string& path);

}  // namespace aalguard::kb
