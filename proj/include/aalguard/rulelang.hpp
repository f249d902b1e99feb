#pragma once

// SWRL-form Horn rules: `atom ^ atom -> atom`, with `?x` variables.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aalguard/kb.hpp"

namespace aalguard::rules {

struct Rule {
    std::optional<std::string> id;
    std::vector<kb::Atom> body;
    std::vector<kb::Atom> head;
};

// Same id, atoms, predicates, terms and constant spellings.
bool structurally_equal(const Rule& a, const Rule& b);

// One rule, optionally preceded by an `@id:` line and followed by '.'.
// A chained implication (`A -> B ^ C -> D`) expands to several rules and is
// only accepted by parse_ruleset.
Rule parse_rule(std::string_view text);

// Rules in file order. A chained implication `A -> B ^ C ^ D -> E` yields
// `A -> B` and `C ^ D -> E`; a label on it names the first rule and later
// ones get `<label>.2`, `<label>.3`, ...
std::vector<Rule> parse_ruleset(std::string_view text);
std::vector<Rule> parse_ruleset_file(const std::string& path);

struct Violation {
    enum class Kind { unsafe_variable, empty_body, empty_head, arity, unsupported_builtin };
    Kind kind;
    std::string detail;
};

std::vector<Violation> validate_rule(const Rule& rule);

// Throws ValidationError listing every violation of the first bad rule.
void require_valid(const std::vector<Rule>& rules);

// Canonical text: single spaces around '^' and '->', no id, no period.
std::string format_rule(const Rule& rule);
// `@id:` lines, one rule per paragraph, each terminated by '.'.
std::string format_ruleset(const std::vector<Rule>& rules);

// Rule id if set, otherwise "#<1-based position>".
std::string display_id(const Rule& rule, std::size_t index);

std::vector<std::string> variables_of(const std::vector<kb::Atom>& atoms);

}  // namespace aalguard::rules
