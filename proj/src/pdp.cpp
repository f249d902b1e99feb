#include "aalguard/pdp.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>

#include "aalguard/engine.hpp"
#include "aalguard/error.hpp"

namespace aalguard::pdp {
namespace {

using kb::Constant;
using kb::Fact;

// Placeholder subject for the scratch store of select_auth_mean.
constexpr std::string_view kScratchSubject = "subject";

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

Constant sym(std::string_view text) { return Constant::from_text(std::string(text)); }

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string join(const std::vector<std::string>& items, char sep = ',') {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out.push_back(sep);
        out += items[i];
    }
    return out;
}

void push_unique(std::vector<std::string>& v, const std::string& item) {
    if (std::find(v.begin(), v.end(), item) == v.end()) v.push_back(item);
}

// Removes every `predicate(user, ...)` fact.
void retract_for(kb::FactStore& store, std::string_view predicate, const Constant& user) {
    std::vector<std::vector<Constant>> doomed;
    for (const kb::StoredFact* s : store.with_predicate(predicate)) {
        if (s->fact.args.front() == user) doomed.push_back(s->fact.args);
    }
    for (const auto& args : doomed) store.retract_fact(predicate, args);
}

// Keeps only the most recently asserted `predicate(user, ...)` fact.
void keep_latest(kb::FactStore& store, std::string_view predicate, const Constant& user) {
    std::vector<std::vector<Constant>> matching;
    for (const kb::StoredFact* s : store.with_predicate(predicate)) {
        if (s->fact.args.front() == user) matching.push_back(s->fact.args);
    }
    if (matching.size() < 2) return;
    matching.pop_back();  // with_predicate is in insertion order
    for (const auto& args : matching) store.retract_fact(predicate, args);
}

std::optional<credentials::Kind> kind_for_mean(std::string_view mean) {
    const std::string m = lower(mean);
    if (m == kPasswordMean) return credentials::Kind::password;
    if (m == kTagMean) return credentials::Kind::tag;
    return std::nullopt;
}

std::string why(const kb::StoredFact& s) {
    return s.fact.origin == kb::Origin::inferred && s.fact.rule_id ? *s.fact.rule_id : "asserted";
}

}  // namespace

int PolicyConfig::priority_of(std::string_view capability) const {
    const std::string key = lower(capability);
    for (const auto& [cap, value] : priority_table) {
        if (lower(cap) == key) return value;
    }
    return 0;
}

std::string_view to_string(Effect effect) { return effect == Effect::permit ? "permit" : "deny"; }

bool valid_time(std::string_view t) {
    auto d = [](char c) { return c >= '0' && c <= '9'; };
    return t.size() == 5 && d(t[0]) && d(t[1]) && t[2] == '.' && d(t[3]) && d(t[4]);
}

std::string select_auth_mean(std::string_view capability, std::string_view behavior_class,
                             const std::vector<rules::Rule>& rules, const PolicyConfig& config) {
    kb::FactStore scratch;
    const Constant subject = Constant::symbol(std::string(kScratchSubject));
    scratch.assert_fact(Fact::make("HasRecognizedBehavior", {subject, sym(behavior_class)}));
    scratch.assert_fact(Fact::make("HasCapability", {subject, Constant::string(std::string(capability))}));
    engine::infer_fixpoint(scratch, rules);

    std::map<std::string, std::size_t> rank;
    for (std::size_t i = 0; i < rules.size(); ++i) rank.emplace(rules::display_id(rules[i], i), i);

    std::optional<std::string> best;
    std::size_t best_rank = rules.size();
    for (const kb::StoredFact* s : scratch.with_predicate("Authentication")) {
        const auto& args = s->fact.args;
        std::optional<std::string> mean;
        if (args.size() == 1) mean = args[0].text();
        if (args.size() == 2 && args[0] == subject) mean = args[1].text();
        if (!mean) continue;
        std::size_t r = rules.size();
        if (s->fact.rule_id) {
            auto it = rank.find(*s->fact.rule_id);
            if (it != rank.end()) r = it->second;
        }
        if (!best || r < best_rank) {
            best = mean;
            best_rank = r;
        }
    }
    return best.value_or(config.default_auth_mean);
}

DecisionPoint::DecisionPoint(kb::FactStore& store, std::vector<rules::Rule> rules,
                             behavior::BehaviorModel& model,
                             const credentials::CredentialsDb& credentials, audit::AuditLog& log,
                             PolicyConfig config)
    : store_(store),
      rules_(std::move(rules)),
      model_(model),
      credentials_(credentials),
      log_(log),
      config_(std::move(config)) {
    rules::require_valid(rules_);
    if (!(config_.trust_threshold >= 0.0 && config_.trust_threshold <= 1.0)) {
        throw ValidationError("trust threshold must lie in [0, 1]");
    }
}

std::optional<std::string> DecisionPoint::append(audit::Entry entry) {
    try {
        log_.record(std::move(entry));
    } catch (const audit::AppendError& e) {
        return std::string(e.what());
    }
    return std::nullopt;
}

std::optional<std::string> DecisionPoint::latest_capability(std::string_view user) const {
    const Constant u = sym(user);
    std::optional<std::string> out;
    for (const kb::StoredFact* s : store_.with_predicate("HasCapability")) {
        if (s->fact.args.size() == 2 && s->fact.args[0] == u) out = s->fact.args[1].text();
    }
    return out;
}

int DecisionPoint::priority_for(std::string_view user) const {
    const Constant u = sym(user);
    int best = 0;
    for (const kb::StoredFact* s : store_.with_predicate("HasCapability")) {
        if (s->fact.args.size() == 2 && s->fact.args[0] == u) {
            best = std::max(best, config_.priority_of(s->fact.args[1].text()));
        }
    }
    return best;
}

std::vector<std::string> DecisionPoint::groups_of(std::string_view user) const {
    const Constant u = sym(user);
    std::vector<std::string> out;
    for (const kb::StoredFact* s : store_.with_predicate("BehaviorCapability")) {
        if (s->fact.args.size() == 2 && s->fact.args[0] == u) push_unique(out, s->fact.args[1].text());
    }
    return out;
}

AuthnResult DecisionPoint::authenticate(const AuthnRequest& request) {
    AuthnResult result;
    const Constant user = sym(request.user);

    const auto cls = model_.classify(request.features);
    result.behavior_class = cls.class_id;
    result.distance = cls.distance;
    result.trust = model_.trust_score(cls.class_id, request.features);

    const auto capability = latest_capability(request.user);
    result.mean_used =
        select_auth_mean(capability.value_or("no"), cls.class_id, rules_, config_);

    bool verified = false;
    const auto kind = kind_for_mean(result.mean_used);
    if (!capability) {
        result.reason = "no capability profile";
    } else if (!kind) {
        result.reason = "unsupported authentication mean";
    } else if (!credentials_.has_user(request.user)) {
        result.reason = "unknown user";
    } else if (!request.credential) {
        result.reason = "no credential presented";
    } else if (request.credential->kind != *kind) {
        result.reason = "credential kind does not match " + result.mean_used;
    } else if (const auto* record = credentials_.find(request.user, *kind); !record) {
        result.reason = "no " + std::string(credentials::to_string(*kind)) + " on record";
    } else if (!credentials::verify(request.credential->secret, *record)) {
        result.reason = "credential rejected";
    } else {
        verified = true;
    }
    const bool trusted = result.trust >= config_.trust_threshold;
    if (verified && !trusted) result.reason = "trust below threshold";
    result.authenticated = verified && trusted;

    retract_for(store_, "Authenticated", user);
    retract_for(store_, "HasRecognizedBehavior", user);
    retract_for(store_, "TrustValue", user);
    store_.assert_fact(Fact::make(
        "Authenticated", {user, Constant::symbol(result.authenticated ? "yes" : "no")}));
    store_.assert_fact(Fact::make("HasRecognizedBehavior", {user, sym(cls.class_id)}));
    store_.assert_fact(Fact::make("TrustValue", {user, Constant::number(result.trust)}));

    std::string detail = "mean=" + result.mean_used + " class=" + cls.class_id +
                         " trust=" + fixed(result.trust);
    if (!result.reason.empty()) detail += " reason=" + result.reason;
    result.audit_error = append(audit::Entry{0, 0, audit::Kind::authn, request.user,
                                             result.authenticated ? "yes" : "no", detail});
    return result;
}

std::vector<Fact> DecisionPoint::assign_group() {
    engine::infer_fixpoint(store_, rules_);
    std::vector<Fact> out;
    for (const kb::StoredFact* s : store_.with_predicate("BehaviorCapability")) out.push_back(s->fact);
    return out;
}

Decision DecisionPoint::authorize(const AuthzRequest& request) {
    if (request.context.time && !valid_time(*request.context.time)) {
        throw ValidationError("context time '" + *request.context.time + "' is not HH.MM");
    }
    const Constant user = sym(request.user);
    const Constant service = sym(request.service);
    Decision decision;
    decision.priority = priority_for(request.user);

    auto finish = [&](Decision& d) {
        std::string detail = "service=" + request.service;
        if (request.device) detail += " device=" + *request.device;
        if (!d.obligations.empty()) detail += " obligations=" + join(d.obligations);
        if (!d.recommendations.empty()) detail += " recommendations=" + join(d.recommendations);
        detail += " priority=" + std::to_string(d.priority) + " rules=" + join(d.rationale);
        d.audit_error = append(audit::Entry{0, 0, audit::Kind::authz, request.user,
                                            std::string(to_string(d.effect)), detail});
        return d;
    };

    if (!store_.contains("Authenticated", {user, Constant::symbol("yes")})) {
        decision.rationale = {"not-authenticated"};
        return finish(decision);
    }

    kb::FactStore scratch = store_;
    retract_for(scratch, "AskedService", user);
    retract_for(scratch, "UsedDevice", user);
    if (request.context.empty()) {
        keep_latest(scratch, "HasContext", user);
    } else {
        retract_for(scratch, "HasContext", user);
    }
    keep_latest(scratch, "HasTime", user);

    scratch.assert_fact(Fact::make("AskedService", {user, service}));
    if (request.device) scratch.assert_fact(Fact::make("UsedDevice", {user, sym(*request.device)}));
    for (const auto* part : {&request.context.time, &request.context.location,
                             &request.context.activity, &request.context.environment}) {
        if (*part) scratch.assert_fact(Fact::make("HasContext", {user, Constant::string(**part)}));
    }
    engine::infer_fixpoint(scratch, rules_);

    std::vector<Constant> subjects{user};
    for (const kb::StoredFact* s : scratch.with_predicate("BehaviorCapability")) {
        if (s->fact.args.size() == 2 && s->fact.args[0] == user) subjects.push_back(s->fact.args[1]);
    }
    auto concerns = [&](const Constant& c) {
        return std::find(subjects.begin(), subjects.end(), c) != subjects.end();
    };

    std::vector<std::string> permit_why;
    std::vector<std::string> deny_why;
    for (const kb::StoredFact* s : scratch.with_predicate("hasAccess")) {
        const auto& args = s->fact.args;
        if (args.size() < 2 || !concerns(args[0])) continue;
        if (args.size() == 3 && !(args[1] == service)) continue;
        if (engine::is_deny(args.back())) push_unique(deny_why, why(*s));
        if (engine::is_permit(args.back())) push_unique(permit_why, why(*s));
    }
    if (!deny_why.empty()) {
        decision.effect = Effect::deny;
        decision.rationale = deny_why;
    } else if (!permit_why.empty()) {
        decision.effect = Effect::permit;
        decision.rationale = permit_why;
    } else {
        decision.effect = Effect::deny;
        decision.rationale = {"default-deny"};
    }

    for (const auto& [predicate, target] :
         {std::pair{"Obligation", &decision.obligations},
          std::pair{"Recommendation", &decision.recommendations}}) {
        for (const kb::StoredFact* s : scratch.with_predicate(predicate)) {
            const auto& args = s->fact.args;
            if (args.size() != 2 || !concerns(args[0])) continue;
            push_unique(*target, args[1].text());
            push_unique(decision.rationale, why(*s));
        }
    }
    return finish(decision);
}

AnomalyResult DecisionPoint::detect_anomaly(std::string_view user, std::string_view class_id,
                                            const behavior::FeatureVector& recent,
                                            double threshold) {
    AnomalyResult result;
    result.trust = model_.trust_score(class_id, recent);
    result.flagged = result.trust < threshold;
    if (!result.flagged) return result;

    const auto groups = groups_of(user);
    const bool in_group = std::find(groups.begin(), groups.end(), config_.emergency_group) != groups.end();
    bool has_capability = false;
    const Constant u = sym(user);
    for (const kb::StoredFact* s : store_.with_predicate("HasCapability")) {
        if (s->fact.args.size() == 2 && s->fact.args[0] == u &&
            lower(s->fact.args[1].text()) == lower(config_.emergency_capability)) {
            has_capability = true;
        }
    }
    if (in_group || has_capability) {
        store_.assert_fact(Fact::make("Obligation", {u, sym(config_.emergency_obligation)}));
        result.obligations.push_back(config_.emergency_obligation);
    }
    std::string detail = "class=" + std::string(class_id) + " trust=" + fixed(result.trust) +
                         " threshold=" + fixed(threshold);
    if (!result.obligations.empty()) detail += " obligations=" + join(result.obligations);
    append(audit::Entry{0, 0, audit::Kind::anomaly, std::string(user), "flagged", detail});
    return result;
}

}  // namespace aalguard::pdp
