#pragma once

// Conjunctive SELECT queries over the materialized store:
//   SELECT ?v1 ?v2 WHERE { atom ^ atom ... } [LIMIT n]

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aalguard/kb.hpp"
#include "aalguard/pdp.hpp"

namespace aalguard::query {

struct ConjunctiveQuery {
    std::vector<std::string> select;  // variable names, no '?'
    std::vector<kb::Atom> where;
    std::optional<std::size_t> limit;
};

using BindingRow = std::map<std::string, kb::Constant>;

// Throws ParseError (with byte offset) on malformed text and
// ValidationError when a select variable is absent from the where clause.
ConjunctiveQuery parse_query(std::string_view text);
std::string format_query(const ConjunctiveQuery& q);
bool structurally_equal(const ConjunctiveQuery& a, const ConjunctiveQuery& b);

void validate(const ConjunctiveQuery& q);

// Distinct rows, sorted by the select variables in order, then truncated.
std::vector<BindingRow> eval_query(const kb::FactStore& store, const ConjunctiveQuery& q);

// The two composite query kinds: one wire message maps to one call.
pdp::AuthnResult authn_query(pdp::DecisionPoint& pdp, std::string user,
                             std::optional<pdp::Credential> credential,
                             behavior::FeatureVector features);
pdp::Decision authz_query(pdp::DecisionPoint& pdp, std::string user, std::string service,
                          std::optional<std::string> device, pdp::RequestContext context);

}  // namespace aalguard::query
