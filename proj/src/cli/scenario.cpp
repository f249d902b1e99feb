#include "aalguard/cli/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aalguard/error.hpp"

namespace aalguard::cli {
namespace {

using nlohmann::json;

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string list(const std::vector<std::string>& items) {
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += items[i];
    }
    return out + "]";
}

bool same_set(std::vector<std::string> a, std::vector<std::string> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a == b;
}

std::vector<std::string> strings(const json& j, const char* what) {
    if (!j.is_array()) throw ValidationError(std::string(what) + " must be a list");
    std::vector<std::string> out;
    for (const auto& item : j) out.push_back(item.get<std::string>());
    return out;
}

std::optional<std::string> opt_string(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
}

ScenarioStep parse_step(const json& j) {
    ScenarioStep step;
    const std::string op = j.at("op").get<std::string>();
    step.user = j.at("user").get<std::string>();
    const json expect = j.value("expect", json::object());
    if (op == "authn") {
        step.kind = ScenarioStep::Kind::authn;
        if (j.contains("credential")) {
            const json& c = j["credential"];
            const auto kind = credentials::parse_kind(c.at("kind").get<std::string>());
            if (!kind) throw ValidationError("unknown credential kind in scenario step");
            step.credential = pdp::Credential{*kind, c.at("secret").get<std::string>()};
        }
        if (expect.contains("authenticated")) {
            step.expect_authenticated = expect["authenticated"].get<std::string>() == "yes";
        }
        step.expect_mean = opt_string(expect, "mean");
    } else if (op == "group") {
        step.kind = ScenarioStep::Kind::group;
        if (expect.contains("groups")) step.expect_groups = strings(expect["groups"], "groups");
    } else if (op == "anomaly") {
        step.kind = ScenarioStep::Kind::anomaly;
        if (expect.contains("flagged")) step.expect_flagged = expect["flagged"].get<bool>();
        if (expect.contains("obligations")) {
            step.expect_obligations = strings(expect["obligations"], "obligations");
        }
    } else if (op == "authorize") {
        step.kind = ScenarioStep::Kind::authorize;
        step.authz.user = step.user;
        step.authz.service = j.at("service").get<std::string>();
        step.authz.device = opt_string(j, "device");
        const json ctx = j.value("context", json::object());
        step.authz.context.time = opt_string(ctx, "time");
        step.authz.context.location = opt_string(ctx, "location");
        step.authz.context.activity = opt_string(ctx, "activity");
        step.authz.context.environment = opt_string(ctx, "environment");
        if (auto effect = opt_string(expect, "effect")) {
            step.expect_effect = *effect == "permit" ? pdp::Effect::permit : pdp::Effect::deny;
        }
        if (expect.contains("obligations")) {
            step.expect_obligations = strings(expect["obligations"], "obligations");
        }
        if (expect.contains("recommendations")) {
            step.expect_recommendations = strings(expect["recommendations"], "recommendations");
        }
    } else {
        throw ValidationError("unknown scenario step '" + op + "'");
    }
    return step;
}

class Checker {
public:
    explicit Checker(std::ostream& out) : out_(out) {}

    template <typename T, typename Show>
    void check(const std::optional<T>& expected, const T& actual, Show show, bool equal) {
        if (!expected) return;
        checked_ = true;
        if (!equal) mismatches_.push_back("expected " + show(*expected) + " got " + show(actual));
    }

    void line(const std::string& text) {
        out_ << "  " << text;
        if (checked_) {
            if (mismatches_.empty()) {
                out_ << "  PASS";
            } else {
                out_ << "  FAIL";
                for (const auto& m : mismatches_) out_ << " (" << m << ")";
                passed_ = false;
            }
        }
        out_ << '\n';
        checked_ = false;
        mismatches_.clear();
    }

    bool passed() const noexcept { return passed_; }

private:
    std::ostream& out_;
    bool checked_ = false;
    bool passed_ = true;
    std::vector<std::string> mismatches_;
};

std::string current_class(const kb::FactStore& store, const std::string& user) {
    const kb::Constant u = kb::Constant::from_text(user);
    std::string out;
    for (const kb::StoredFact* s : store.with_predicate("HasRecognizedBehavior")) {
        if (s->fact.args.size() == 2 && s->fact.args[0] == u) out = s->fact.args[1].text();
    }
    return out;
}

}  // namespace

std::unique_ptr<Deployment> make_deployment(kb::FactStore store, std::vector<rules::Rule> rules,
                                            behavior::BehaviorModel model,
                                            credentials::CredentialsDb credentials,
                                            std::unique_ptr<audit::AuditLog> log,
                                            const Config& config) {
    config.validate();
    auto d = std::make_unique<Deployment>();
    d->store = std::move(store);
    d->model = std::move(model);
    d->model.set_distance_floor(config.distance_floor);
    d->credentials = std::move(credentials);
    d->log = log ? std::move(log) : std::make_unique<audit::AuditLog>();
    d->pdp = std::make_unique<pdp::DecisionPoint>(d->store, std::move(rules), d->model,
                                                  d->credentials, *d->log, config.policy());
    return d;
}

std::unique_ptr<Deployment> open_deployment(const Config& config) {
    kb::FactStore store = config.facts ? kb::load_facts_file(*config.facts) : kb::FactStore{};
    auto rules = config.rules ? rules::parse_ruleset_file(*config.rules) : std::vector<rules::Rule>{};
    auto model = config.model ? behavior::load_model_file(*config.model, config.distance_floor)
                              : behavior::BehaviorModel({}, config.distance_floor);
    auto creds = config.credentials ? credentials::CredentialsDb::load_file(*config.credentials)
                                    : credentials::CredentialsDb{};
    std::unique_ptr<audit::AuditLog> log;
    if (config.audit) log = std::make_unique<audit::AuditLog>(*config.audit, audit::AuditLog::Mode::append);
    auto d = make_deployment(std::move(store), std::move(rules), std::move(model), std::move(creds),
                             std::move(log), config);
    if (config.events) {
        const auto events = behavior::load_events_file(*config.events);
        for (const auto& user : behavior::users_of(events)) {
            d->profile_features[user] = behavior::extract_features(events, user);
        }
    }
    return d;
}

const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names{"deaf", "blind", "alzheimer"};
    return names;
}

ScenarioFixture load_fixture(const std::filesystem::path& scenarios_dir, const std::string& name) {
    const auto& names = scenario_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        throw NotFoundError("unknown scenario '" + name + "' (expected deaf, blind or alzheimer)");
    }
    const auto dir = scenarios_dir / name;
    const auto manifest = dir / "scenario.json";
    std::ifstream in(manifest);
    if (!in) throw IoError("cannot open scenario manifest '" + manifest.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(manifest.string() + ": " + e.what(), 1, 0);
    }
    try {
        ScenarioFixture f;
        f.name = j.at("name").get<std::string>();
        f.facts = dir / j.at("facts").get<std::string>();
        f.rules = dir / j.at("rules").get<std::string>();
        f.events = dir / j.at("events").get<std::string>();
        if (auto recent = opt_string(j, "recent_events")) f.recent_events = dir / *recent;
        f.model = dir / j.at("model").get<std::string>();
        f.credentials = dir / j.at("credentials").get<std::string>();
        f.clock_start = j.value("clock_start", std::int64_t{0});
        for (const auto& step : j.at("steps")) f.steps.push_back(parse_step(step));
        return f;
    } catch (const json::exception& e) {
        throw ValidationError(manifest.string() + ": " + e.what());
    }
}

bool apply_fixture(Deployment& d, const ScenarioFixture& fixture, bool run_authorize,
                   std::ostream& report) {
    for (kb::Fact& fact : kb::load_facts_file(fixture.facts.string()).facts()) {
        d.store.assert_fact(std::move(fact));
    }
    const auto creds = credentials::CredentialsDb::load_file(fixture.credentials.string());
    for (const auto& record : creds.records()) d.credentials.add(record);

    Checker checker(report);
    const auto events = behavior::load_events_file(fixture.events.string());
    for (const auto& user : behavior::users_of(events)) {
        auto fv = behavior::extract_features(events, user);
        const auto cls = d.model.classify(fv);
        checker.line("classify " + user + " class=" + cls.class_id + " distance=" +
                     fixed(cls.distance) + " trust=" + fixed(d.model.trust_score(cls.class_id, fv)));
        d.profile_features[user] = std::move(fv);
    }
    if (fixture.recent_events) {
        const auto recent = behavior::load_events_file(fixture.recent_events->string());
        for (const auto& user : behavior::users_of(recent)) {
            d.recent_features[user] = behavior::extract_features(recent, user);
        }
    }

    auto& pdp = *d.pdp;
    for (const ScenarioStep& step : fixture.steps) {
        switch (step.kind) {
            case ScenarioStep::Kind::authn: {
                pdp::AuthnRequest req{step.user, step.credential, d.profile_features[step.user]};
                const auto r = pdp.authenticate(req);
                const std::string yes_no = r.authenticated ? "yes" : "no";
                checker.check(step.expect_authenticated, r.authenticated,
                              [](bool b) { return std::string(b ? "yes" : "no"); },
                              step.expect_authenticated == r.authenticated);
                checker.check(step.expect_mean, r.mean_used, [](const std::string& s) { return s; },
                              step.expect_mean == r.mean_used);
                std::string text = "authn " + step.user + " mean=" + r.mean_used + " class=" +
                                   r.behavior_class + " trust=" + fixed(r.trust) + " -> " + yes_no;
                if (!r.reason.empty()) text += " (" + r.reason + ")";
                checker.line(text);
                break;
            }
            case ScenarioStep::Kind::group: {
                pdp.assign_group();
                const auto groups = pdp.groups_of(step.user);
                checker.check(step.expect_groups, groups, list,
                              !step.expect_groups || same_set(*step.expect_groups, groups));
                checker.line("group " + step.user + " " + list(groups));
                break;
            }
            case ScenarioStep::Kind::anomaly: {
                const auto& fv = d.recent_features[step.user];
                std::string cls = current_class(d.store, step.user);
                if (cls.empty()) cls = d.model.classify(fv).class_id;
                const auto r = pdp.detect_anomaly(step.user, cls, fv, pdp.config().trust_threshold);
                checker.check(step.expect_flagged, r.flagged,
                              [](bool b) { return std::string(b ? "yes" : "no"); },
                              step.expect_flagged == r.flagged);
                checker.check(step.expect_obligations, r.obligations, list,
                              !step.expect_obligations || same_set(*step.expect_obligations, r.obligations));
                checker.line("anomaly " + step.user + " class=" + cls + " trust=" + fixed(r.trust) +
                             " flagged=" + (r.flagged ? "yes" : "no") + " obligations=" +
                             list(r.obligations));
                break;
            }
            case ScenarioStep::Kind::authorize: {
                if (!run_authorize) break;
                const auto dec = pdp.authorize(step.authz);
                const std::string effect(pdp::to_string(dec.effect));
                checker.check(step.expect_effect, dec.effect,
                              [](pdp::Effect e) { return std::string(pdp::to_string(e)); },
                              step.expect_effect == dec.effect);
                checker.check(step.expect_obligations, dec.obligations, list,
                              !step.expect_obligations || same_set(*step.expect_obligations, dec.obligations));
                checker.check(step.expect_recommendations, dec.recommendations, list,
                              !step.expect_recommendations ||
                                  same_set(*step.expect_recommendations, dec.recommendations));
                std::string text = "authorize " + step.user + " " + step.authz.service;
                if (step.authz.device) text += " device=" + *step.authz.device;
                if (step.authz.context.time) text += " time=" + *step.authz.context.time;
                text += " -> " + effect + " obligations=" + list(dec.obligations) +
                        " recommendations=" + list(dec.recommendations) +
                        " priority=" + std::to_string(dec.priority) + " rules=" + list(dec.rationale);
                checker.line(text);
                break;
            }
        }
    }
    return checker.passed();
}

ScenarioOutcome run_scenario(const std::string& name, const Config& config) {
    const ScenarioFixture fixture = load_fixture(config.scenarios, name);
    auto rules = rules::parse_ruleset_file(fixture.rules.string());
    auto model = behavior::load_model_file(fixture.model.string(), config.distance_floor);
    auto log = config.audit
                   ? std::make_unique<audit::AuditLog>(*config.audit, audit::AuditLog::Mode::truncate,
                                                       audit::stepping_clock(fixture.clock_start))
                   : std::make_unique<audit::AuditLog>(audit::stepping_clock(fixture.clock_start));
    auto d = make_deployment({}, std::move(rules), std::move(model), {}, std::move(log), config);

    std::ostringstream report;
    report << "scenario " << fixture.name << '\n';
    ScenarioOutcome outcome;
    outcome.passed = apply_fixture(*d, fixture, true, report);
    report << "audit entries " << d->log->entries().size() << '\n';
    report << "result " << (outcome.passed ? "PASS" : "FAIL") << '\n';
    outcome.report = report.str();
    outcome.audit = d->log->entries();
    return outcome;
}

}  // namespace aalguard::cli
