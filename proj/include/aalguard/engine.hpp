#pragma once

// Forward chaining to the least fixpoint of a positive Horn ruleset,
// consistency checks over the materialized store, and derivation trees.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aalguard/kb.hpp"
#include "aalguard/rulelang.hpp"

namespace aalguard::engine {

struct InferenceReport {
    std::vector<kb::Fact> derived;  // derivation order
    std::size_t iterations = 0;     // semi-naive rounds, 0 for an empty ruleset
    std::map<std::string, std::size_t> rule_firings;  // rule id -> new facts produced
};

// Materializes every consequence of `rules` into `store` (origin=inferred,
// first derivation recorded). Throws ValidationError for unsafe rules or
// unsupported built-ins before anything fires.
InferenceReport infer_fixpoint(kb::FactStore& store, const std::vector<rules::Rule>& rules);

struct Conflict {
    enum class Kind { permit_deny, authenticated_contradiction, custom };
    Kind kind = Kind::custom;
    std::pair<kb::Fact, kb::Fact> facts;
    kb::Constant subject;
    std::string description;
};

using ConsistencyCheck = std::function<std::vector<Conflict>(const kb::FactStore&)>;

// hasAccess permit/deny clashes per (subject, service) and users that are
// both Authenticated yes and no.
std::vector<ConsistencyCheck> default_checks();

std::vector<Conflict> check_consistency(const kb::FactStore& store,
                                        const std::vector<ConsistencyCheck>& checks = default_checks());

struct Derivation {
    kb::Fact root;
    std::optional<std::string> rule_id;  // empty for asserted leaves
    std::vector<Derivation> premises;

    bool is_leaf() const noexcept { return !rule_id.has_value(); }
};

// Throws NotFoundError when the fact is not in the store.
Derivation explain(const kb::FactStore& store, const kb::Fact& fact);

// Indented tree, one node per line.
std::string render(const Derivation& derivation);

// Access effect values compare case-insensitively ("Deny" == deny).
bool is_permit(const kb::Constant& effect);
bool is_deny(const kb::Constant& effect);

}  // namespace aalguard::engine
