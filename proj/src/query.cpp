#include "aalguard/query.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "aalguard/error.hpp"
#include "syntax.hpp"

namespace aalguard::query {
namespace {

using syntax::Tok;

bool keyword(const syntax::Token& t, std::string_view word) {
    if (t.kind != Tok::ident || t.text.size() != word.size()) return false;
    for (std::size_t i = 0; i < word.size(); ++i) {
        if (std::toupper(static_cast<unsigned char>(t.text[i])) != word[i]) return false;
    }
    return true;
}

// Left-to-right nested-loop join.
void join(const kb::FactStore& store, const std::vector<kb::Atom>& where, std::size_t i,
          const kb::Bindings& bindings, std::vector<kb::Bindings>& out) {
    if (i == where.size()) {
        out.push_back(bindings);
        return;
    }
    const kb::Atom pattern = kb::substitute(where[i], bindings);
    for (const kb::Bindings& extra : kb::match_pattern(store, pattern)) {
        kb::Bindings merged = bindings;
        merged.insert(extra.begin(), extra.end());
        join(store, where, i + 1, merged, out);
    }
}

}  // namespace

void validate(const ConjunctiveQuery& q) {
    if (q.where.empty()) throw ValidationError("query has an empty WHERE clause");
    std::set<std::string> vars;
    for (const kb::Atom& a : q.where) {
        for (const kb::Term& t : a.terms) {
            if (t.is_variable()) vars.insert(t.variable);
        }
    }
    for (const std::string& v : q.select) {
        if (!vars.count(v)) throw ValidationError("select variable ?" + v + " does not occur in WHERE");
    }
    if (q.limit && *q.limit == 0) throw ValidationError("LIMIT must be positive");
}

ConjunctiveQuery parse_query(std::string_view text) {
    syntax::Cursor cur(syntax::tokenize(text));
    auto skip = [&] { cur.skip_blanks(); };
    ConjunctiveQuery q;
    skip();
    if (!keyword(cur.peek(), "SELECT")) cur.fail("query must start with SELECT", {"SELECT"});
    cur.next();
    skip();
    while (cur.at(Tok::variable)) {
        q.select.push_back(cur.next().text);
        skip();
    }
    if (q.select.empty()) cur.fail("SELECT needs at least one variable", {"variable"});
    if (!keyword(cur.peek(), "WHERE")) cur.fail("missing WHERE", {"variable", "WHERE"});
    cur.next();
    skip();
    cur.expect(Tok::lbrace);
    skip();
    q.where.push_back(cur.atom(true));
    skip();
    while (cur.accept(Tok::caret)) {
        skip();
        q.where.push_back(cur.atom(true));
        skip();
    }
    if (!cur.at(Tok::rbrace)) cur.fail("unterminated WHERE clause", {"'^'", "'}'"});
    cur.next();
    skip();
    if (keyword(cur.peek(), "LIMIT")) {
        cur.next();
        skip();
        const syntax::Token& n = cur.peek();
        if (n.kind != Tok::number || n.text.find_first_not_of("0123456789") != std::string::npos) {
            cur.fail("LIMIT needs a positive integer", {"number"});
        }
        q.limit = std::stoull(n.text);
        cur.next();
        skip();
    }
    if (!cur.at(Tok::end)) cur.fail("trailing input after query", {"LIMIT", "end of input"});
    validate(q);
    return q;
}

std::string format_query(const ConjunctiveQuery& q) {
    std::string out = "SELECT";
    for (const std::string& v : q.select) out += " ?" + v;
    out += " WHERE { ";
    for (std::size_t i = 0; i < q.where.size(); ++i) {
        if (i) out += " ^ ";
        out += q.where[i].to_source();
    }
    out += " }";
    if (q.limit) out += " LIMIT " + std::to_string(*q.limit);
    return out;
}

bool structurally_equal(const ConjunctiveQuery& a, const ConjunctiveQuery& b) {
    return a.select == b.select && a.limit == b.limit && a.where.size() == b.where.size() &&
           std::equal(a.where.begin(), a.where.end(), b.where.begin(),
                      [](const kb::Atom& x, const kb::Atom& y) { return x.identical(y); });
}

std::vector<BindingRow> eval_query(const kb::FactStore& store, const ConjunctiveQuery& q) {
    validate(q);
    std::vector<kb::Bindings> full;
    join(store, q.where, 0, {}, full);

    auto key_of = [&](const BindingRow& row) {
        std::vector<kb::Constant> key;
        for (const std::string& v : q.select) key.push_back(row.at(v));
        return key;
    };
    std::map<std::vector<kb::Constant>, BindingRow> distinct;
    for (const kb::Bindings& b : full) {
        BindingRow row;
        for (const std::string& v : q.select) row.emplace(v, b.at(v));
        distinct.emplace(key_of(row), std::move(row));
    }
    std::vector<BindingRow> out;
    for (auto& [key, row] : distinct) {
        if (q.limit && out.size() >= *q.limit) break;
        out.push_back(std::move(row));
    }
    return out;
}

pdp::AuthnResult authn_query(pdp::DecisionPoint& pdp, std::string user,
                             std::optional<pdp::Credential> credential,
                             behavior::FeatureVector features) {
    return pdp.authenticate(pdp::AuthnRequest{std::move(user), std::move(credential), std::move(features)});
}

pdp::Decision authz_query(pdp::DecisionPoint& pdp, std::string user, std::string service,
                          std::optional<std::string> device, pdp::RequestContext context) {
    return pdp.authorize(
        pdp::AuthzRequest{std::move(user), std::move(service), std::move(device), std::move(context)});
}

}  // namespace aalguard::query
