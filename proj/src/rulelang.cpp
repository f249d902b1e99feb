#include "aalguard/rulelang.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "aalguard/error.hpp"
#include "syntax.hpp"

namespace aalguard::rules {
namespace {

using syntax::Cursor;
using syntax::Tok;

std::vector<kb::Atom> atom_list(Cursor& cur) {
    std::vector<kb::Atom> atoms;
    atoms.push_back(cur.atom(true));
    while (cur.accept(Tok::caret)) atoms.push_back(cur.atom(true));
    return atoms;
}

// rule := [ idline ] atoms arrow atoms { arrow atoms }
std::vector<Rule> rule_chain(Cursor& cur) {
    std::optional<std::string> label;
    if (cur.at(Tok::id_line)) {
        label = cur.next().text;
        cur.skip_blanks();
    }

    std::vector<std::vector<kb::Atom>> groups;
    std::vector<std::size_t> group_lines;
    group_lines.push_back(cur.peek().line);
    groups.push_back(atom_list(cur));
    if (!cur.at(Tok::arrow)) cur.fail("unexpected " + std::string(syntax::describe(cur.peek().kind)), {"'^'", "'->'"});
    while (cur.accept(Tok::arrow)) {
        group_lines.push_back(cur.peek().line);
        groups.push_back(atom_list(cur));
    }
    cur.accept(Tok::dot);

    std::vector<Rule> out;
    std::vector<kb::Atom> body = std::move(groups.front());
    for (std::size_t g = 1; g < groups.size(); ++g) {
        auto& group = groups[g];
        Rule rule;
        rule.body = std::move(body);
        if (g + 1 == groups.size()) {
            rule.head = std::move(group);
        } else {
            // The first atom closes this rule; the rest open the next body.
            rule.head.push_back(std::move(group.front()));
            body.assign(std::make_move_iterator(group.begin() + 1),
                        std::make_move_iterator(group.end()));
            if (body.empty()) {
                throw ParseError("chained implication leaves an empty body", group_lines[g], 0,
                                 {"'^'"});
            }
        }
        if (label) {
            rule.id = out.empty() ? *label : *label + "." + std::to_string(out.size() + 1);
        }
        out.push_back(std::move(rule));
    }
    return out;
}

void collect_vars(const kb::Atom& a, std::vector<std::string>& out, std::set<std::string>& seen) {
    for (const kb::Term& t : a.terms) {
        if (t.is_variable() && seen.insert(t.variable).second) out.push_back(t.variable);
    }
}

}  // namespace

bool structurally_equal(const Rule& a, const Rule& b) {
    auto same = [](const std::vector<kb::Atom>& x, const std::vector<kb::Atom>& y) {
        return x.size() == y.size() &&
               std::equal(x.begin(), x.end(), y.begin(),
                          [](const kb::Atom& p, const kb::Atom& q) { return p.identical(q); });
    };
    return a.id == b.id && same(a.body, b.body) && same(a.head, b.head);
}

Rule parse_rule(std::string_view text) {
    Cursor cur(syntax::tokenize(text));
    cur.skip_blanks();
    auto chain = rule_chain(cur);
    cur.skip_blanks();
    if (!cur.at(Tok::end)) cur.fail("trailing input after rule", {"end of input"});
    if (chain.size() != 1) {
        throw ParseError("chained implication defines " + std::to_string(chain.size()) +
                             " rules; parse it as a ruleset",
                         1, 0);
    }
    return std::move(chain.front());
}

std::vector<Rule> parse_ruleset(std::string_view text) {
    Cursor cur(syntax::tokenize(text));
    std::vector<Rule> out;
    std::set<std::string> ids;
    cur.skip_blanks();
    while (!cur.at(Tok::end)) {
        const std::size_t line = cur.peek().line;
        for (Rule& r : rule_chain(cur)) {
            if (r.id && !ids.insert(*r.id).second) {
                throw ParseError("duplicate rule id '" + *r.id + "'", line, 0);
            }
            out.push_back(std::move(r));
        }
        cur.skip_blanks();
    }
    return out;
}

std::vector<Rule> parse_ruleset_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open rule file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_ruleset(buf.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.detail(), e.line(), e.offset(), e.expected());
    }
}

std::vector<std::string> variables_of(const std::vector<kb::Atom>& atoms) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const kb::Atom& a : atoms) collect_vars(a, out, seen);
    return out;
}

std::vector<Violation> validate_rule(const Rule& rule) {
    std::vector<Violation> out;
    if (rule.body.empty()) out.push_back({Violation::Kind::empty_body, "rule has no body atoms"});
    if (rule.head.empty()) out.push_back({Violation::Kind::empty_head, "rule has no head atoms"});
    for (const auto* side : {&rule.body, &rule.head}) {
        for (const kb::Atom& a : *side) {
            if (a.terms.empty() || a.terms.size() > kb::kMaxArity) {
                out.push_back({Violation::Kind::arity,
                               a.predicate + " has arity " + std::to_string(a.terms.size())});
            }
            if (syntax::is_reserved_builtin(a.predicate)) {
                out.push_back({Violation::Kind::unsupported_builtin,
                               "unsupported built-in '" + a.predicate + "'"});
            }
        }
    }
    const auto body_vars = variables_of(rule.body);
    const std::set<std::string> bound(body_vars.begin(), body_vars.end());
    for (const std::string& v : variables_of(rule.head)) {
        if (!bound.count(v)) {
            out.push_back({Violation::Kind::unsafe_variable,
                           "head variable ?" + v + " does not occur in the body"});
        }
    }
    return out;
}

void require_valid(const std::vector<Rule>& rules) {
    for (std::size_t i = 0; i < rules.size(); ++i) {
        const auto violations = validate_rule(rules[i]);
        if (violations.empty()) continue;
        std::string msg = "rule " + display_id(rules[i], i) + ":";
        for (const auto& v : violations) msg += " " + v.detail + ";";
        msg.pop_back();
        throw ValidationError(msg);
    }
}

std::string format_rule(const Rule& rule) {
    auto join = [](const std::vector<kb::Atom>& atoms) {
        std::string s;
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            if (i) s += " ^ ";
            s += atoms[i].to_source();
        }
        return s;
    };
    return join(rule.body) + " -> " + join(rule.head);
}

std::string format_ruleset(const std::vector<Rule>& rules) {
    std::string out;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        if (i) out += '\n';
        if (rules[i].id) out += "@id: " + *rules[i].id + "\n";
        out += format_rule(rules[i]) + ".\n";
    }
    return out;
}

std::string display_id(const Rule& rule, std::size_t index) {
    return rule.id ? *rule.id : "#" + std::to_string(index + 1);
}

}  // namespace aalguard::rules
