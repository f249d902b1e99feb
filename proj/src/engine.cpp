#include "aalguard/engine.hpp"

#include <algorithm>
#include <cctype>

#include "aalguard/error.hpp"

namespace aalguard::engine {
namespace {

using Tuples = std::vector<const kb::StoredFact*>;
using Relation = std::map<std::string, Tuples>;  // folded predicate -> facts

struct CompiledRule {
    std::string id;
    std::vector<kb::Atom> body;
    std::vector<std::string> body_keys;
    kb::Atom head;
};

std::vector<CompiledRule> compile(const std::vector<rules::Rule>& rules) {
    rules::require_valid(rules);
    std::vector<CompiledRule> out;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        const auto& rule = rules[i];
        for (const kb::Atom& head : rule.head) {
            CompiledRule c;
            c.id = rules::display_id(rule, i);
            c.body = rule.body;
            for (const auto& a : rule.body) c.body_keys.push_back(kb::fold_predicate(a.predicate));
            c.head = head;
            out.push_back(std::move(c));
        }
    }
    return out;
}

const Tuples& lookup(const Relation& rel, const std::string& key) {
    static const Tuples kEmpty;
    auto it = rel.find(key);
    return it == rel.end() ? kEmpty : it->second;
}

class Round {
public:
    Round(kb::FactStore& store, const Relation& old, const Relation& delta, Relation& next,
          InferenceReport& report)
        : store_(store), old_(old), delta_(delta), next_(next), report_(report) {}

    // Evaluate `rule` with body atom `pivot` restricted to the delta: atoms
    // before it read the old facts, atoms after it read old + delta.
    void run(const CompiledRule& rule, std::size_t pivot) {
        rule_ = &rule;
        pivot_ = pivot;
        matched_.assign(rule.body.size(), nullptr);
        kb::Bindings b;
        join(0, b);
    }

private:
    void join(std::size_t j, kb::Bindings& bindings) {
        if (j == rule_->body.size()) {
            emit(bindings);
            return;
        }
        const std::string& key = rule_->body_keys[j];
        auto scan = [&](const Tuples& tuples) {
            for (const kb::StoredFact* s : tuples) {
                kb::Bindings extended = bindings;
                if (!kb::unify(rule_->body[j], s->fact.args, extended)) continue;
                matched_[j] = s;
                join(j + 1, extended);
            }
        };
        if (j < pivot_) {
            scan(lookup(old_, key));
        } else if (j == pivot_) {
            scan(lookup(delta_, key));
        } else {
            scan(lookup(old_, key));
            scan(lookup(delta_, key));
        }
    }

    void emit(const kb::Bindings& bindings) {
        const kb::Atom ground = kb::substitute(rule_->head, bindings);
        kb::Fact fact;
        fact.predicate = ground.predicate;
        for (const kb::Term& t : ground.terms) fact.args.push_back(t.value);
        if (store_.contains(fact.predicate, fact.args)) return;

        std::vector<kb::Fact> premises;
        premises.reserve(matched_.size());
        for (const kb::StoredFact* s : matched_) premises.push_back(s->fact);
        auto args = fact.args;
        const std::string pred = fact.predicate;
        store_.add_inferred(std::move(fact), rule_->id, std::move(premises));

        const kb::StoredFact* stored = store_.find(pred, args);
        next_[kb::fold_predicate(pred)].push_back(stored);
        report_.derived.push_back(stored->fact);
        ++report_.rule_firings[rule_->id];
    }

    kb::FactStore& store_;
    const Relation& old_;
    const Relation& delta_;
    Relation& next_;
    InferenceReport& report_;
    const CompiledRule* rule_ = nullptr;
    std::size_t pivot_ = 0;
    std::vector<const kb::StoredFact*> matched_;
};

std::string lower(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<Conflict> permit_deny_conflicts(const kb::FactStore& store) {
    // (subject, service) -> first permit / first deny fact; binary facts use no service.
    struct Slot {
        std::optional<kb::Fact> permit;
        std::optional<kb::Fact> deny;
    };
    std::map<std::pair<kb::Constant, std::optional<kb::Constant>>, Slot> slots;
    std::vector<std::pair<kb::Constant, std::optional<kb::Constant>>> order;
    for (const kb::StoredFact* s : store.with_predicate("hasAccess")) {
        const auto& args = s->fact.args;
        if (args.size() < 2) continue;
        std::optional<kb::Constant> service;
        if (args.size() == 3) service = args[1];
        const kb::Constant& effect = args.back();
        auto key = std::make_pair(args[0], service);
        auto [it, inserted] = slots.try_emplace(key);
        if (inserted) order.push_back(key);
        if (is_permit(effect) && !it->second.permit) it->second.permit = s->fact;
        if (is_deny(effect) && !it->second.deny) it->second.deny = s->fact;
    }
    std::vector<Conflict> out;
    for (const auto& key : order) {
        const Slot& slot = slots[key];
        if (!slot.permit || !slot.deny) continue;
        Conflict c;
        c.kind = Conflict::Kind::permit_deny;
        c.facts = {*slot.permit, *slot.deny};
        c.subject = key.first;
        c.description = "permit and deny for " + key.first.to_source() +
                        (key.second ? " on " + key.second->to_source() : "");
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<Conflict> authentication_conflicts(const kb::FactStore& store) {
    std::vector<Conflict> out;
    const auto yes = kb::Constant::symbol("yes");
    const auto no = kb::Constant::symbol("no");
    for (const kb::StoredFact* s : store.with_predicate("Authenticated")) {
        const auto& args = s->fact.args;
        if (args.size() != 2 || !(args[1] == yes)) continue;
        const kb::StoredFact* other = store.find("Authenticated", {args[0], no});
        if (!other) continue;
        Conflict c;
        c.kind = Conflict::Kind::authenticated_contradiction;
        c.facts = {s->fact, other->fact};
        c.subject = args[0];
        c.description = args[0].to_source() + " is both authenticated and not";
        out.push_back(std::move(c));
    }
    return out;
}

void render_into(const Derivation& d, std::size_t depth, std::string& out) {
    out.append(depth * 2, ' ');
    out += d.root.to_source();
    if (d.rule_id) {
        out += "  <= " + *d.rule_id;
    } else {
        out += "  [asserted]";
    }
    out += '\n';
    for (const Derivation& p : d.premises) render_into(p, depth + 1, out);
}

}  // namespace

InferenceReport infer_fixpoint(kb::FactStore& store, const std::vector<rules::Rule>& rules) {
    const auto compiled = compile(rules);
    InferenceReport report;
    if (compiled.empty()) return report;

    Relation old;
    Relation delta;
    for (const kb::StoredFact* s : store.all()) {
        delta[kb::fold_predicate(s->fact.predicate)].push_back(s);
    }

    while (true) {
        ++report.iterations;
        Relation next;
        Round round(store, old, delta, next, report);
        for (const CompiledRule& rule : compiled) {
            for (std::size_t pivot = 0; pivot < rule.body.size(); ++pivot) {
                if (!lookup(delta, rule.body_keys[pivot]).empty()) round.run(rule, pivot);
            }
        }
        if (next.empty()) break;
        for (auto& [key, tuples] : delta) {
            auto& dst = old[key];
            dst.insert(dst.end(), tuples.begin(), tuples.end());
        }
        delta = std::move(next);
    }
    return report;
}

std::vector<ConsistencyCheck> default_checks() {
    return {permit_deny_conflicts, authentication_conflicts};
}

std::vector<Conflict> check_consistency(const kb::FactStore& store,
                                        const std::vector<ConsistencyCheck>& checks) {
    std::vector<Conflict> out;
    for (const auto& check : checks) {
        auto found = check(store);
        out.insert(out.end(), std::make_move_iterator(found.begin()),
                   std::make_move_iterator(found.end()));
    }
    return out;
}

Derivation explain(const kb::FactStore& store, const kb::Fact& fact) {
    const kb::StoredFact* stored = store.find(fact.predicate, fact.args);
    if (!stored) throw NotFoundError("fact " + fact.to_source() + " is not in the store");
    Derivation d;
    d.root = stored->fact;
    if (stored->fact.origin == kb::Origin::asserted) return d;
    d.rule_id = stored->fact.rule_id.value_or("");
    for (const kb::Fact& premise : stored->premises) {
        if (store.contains(premise.predicate, premise.args)) {
            d.premises.push_back(explain(store, premise));
        } else {
            // Premise retracted after the derivation was recorded.
            d.premises.push_back(Derivation{premise, std::nullopt, {}});
        }
    }
    return d;
}

std::string render(const Derivation& derivation) {
    std::string out;
    render_into(derivation, 0, out);
    return out;
}

bool is_permit(const kb::Constant& effect) {
    return !effect.is_number() && lower(effect.text()) == "permit";
}

bool is_deny(const kb::Constant& effect) {
    return !effect.is_number() && lower(effect.text()) == "deny";
}

}  // namespace aalguard::engine
