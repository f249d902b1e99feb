#include "aalguard/cli/commands.hpp"

#include <csignal>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>

#include <CLI11.hpp>

#include "aalguard/behavior.hpp"
#include "aalguard/cli/config.hpp"
#include "aalguard/cli/scenario.hpp"
#include "aalguard/cli/serve.hpp"
#include "aalguard/credentials.hpp"
#include "aalguard/engine.hpp"
#include "aalguard/error.hpp"
#include "aalguard/kb.hpp"
#include "aalguard/query.hpp"
#include "aalguard/rulelang.hpp"

namespace aalguard::cli {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitIo = 2;

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

// Flags that override configuration keys, in `Config::set` spelling.
struct Overrides {
    std::string config_path;
    std::map<std::string, std::string> values;
    std::vector<std::string> priorities;  // cap=N
};

void add_override(CLI::App& app, Overrides& o, const std::string& key, const std::string& help) {
    std::string flag = "--" + key;
    for (char& c : flag) {
        if (c == '_') c = '-';
    }
    app.add_option_function<std::string>(
        flag, [&o, key](const std::string& v) { o.values[key] = v; }, help);
}

Config build_config(const Overrides& o) {
    Config cfg = resolve_config(o.config_path.empty() ? std::nullopt
                                                      : std::optional<std::string>(o.config_path));
    for (const auto& [key, value] : o.values) cfg.set(key, value);
    for (const auto& p : o.priorities) {
        const auto eq = p.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ValidationError("--priority expects <capability>=<n>, got '" + p + "'");
        }
        cfg.set("priority." + p.substr(0, eq), p.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

kb::FactStore load_store(const Config& cfg) {
    return cfg.facts ? kb::load_facts_file(*cfg.facts) : kb::FactStore{};
}

std::vector<rules::Rule> load_rules(const Config& cfg) {
    auto rules = cfg.rules ? rules::parse_ruleset_file(*cfg.rules) : std::vector<rules::Rule>{};
    rules::require_valid(rules);
    return rules;
}

int cmd_load(const Config& cfg, std::ostream& out) {
    if (!cfg.facts && !cfg.rules && !cfg.events && !cfg.credentials && !cfg.model) {
        throw ValidationError("load needs at least one of --facts, --rules, --events, --credentials, --model");
    }
    if (cfg.facts) {
        const auto store = kb::load_facts_file(*cfg.facts);
        std::size_t inferred = 0;
        for (const auto* s : store.all()) inferred += s->fact.origin == kb::Origin::inferred;
        out << "facts " << store.size() << " (asserted " << store.size() - inferred << ", inferred "
            << inferred << ")\n";
    }
    if (cfg.rules) out << "rules " << load_rules(cfg).size() << '\n';
    if (cfg.events) {
        const auto events = behavior::load_events_file(*cfg.events);
        const auto users = behavior::users_of(events);
        for (const auto& u : users) (void)behavior::extract_features(events, u);
        out << "events " << events.size() << " users " << users.size() << '\n';
    }
    if (cfg.credentials) {
        out << "credentials " << credentials::CredentialsDb::load_file(*cfg.credentials).records().size()
            << '\n';
    }
    if (cfg.model) {
        out << "classes " << behavior::load_model_file(*cfg.model, cfg.distance_floor).classes().size()
            << '\n';
    }
    return kExitOk;
}

int cmd_infer(const Config& cfg, const std::string& save_path, std::ostream& out) {
    auto store = load_store(cfg);
    const auto rules = load_rules(cfg);
    const auto report = engine::infer_fixpoint(store, rules);
    out << "derived " << report.derived.size() << " iterations " << report.iterations << '\n';
    for (const auto& fact : report.derived) {
        const auto* stored = store.find(fact.predicate, fact.args);
        out << "  " << fact.to_source() << ".";
        if (stored && stored->fact.rule_id) out << "  # by " << *stored->fact.rule_id;
        out << '\n';
    }
    for (const auto& [id, n] : report.rule_firings) out << "rule " << id << " fired " << n << '\n';
    for (const auto& c : engine::check_consistency(store)) out << "conflict " << c.description << '\n';
    if (!save_path.empty()) kb::save_facts_file(store, save_path);
    return kExitOk;
}

int cmd_explain(const Config& cfg, const std::string& fact_text, std::ostream& out) {
    auto store = load_store(cfg);
    engine::infer_fixpoint(store, load_rules(cfg));
    std::string text = fact_text;
    while (!text.empty() && (text.back() == ' ' || text.back() == '\n')) text.pop_back();
    if (text.empty() || text.back() != '.') text += '.';
    const auto parsed = kb::load_facts(text).facts();
    if (parsed.size() != 1) throw ValidationError("--fact expects exactly one fact");
    out << engine::render(engine::explain(store, parsed.front()));
    return kExitOk;
}

int cmd_query(const Config& cfg, const std::string& text, std::ostream& out) {
    const auto q = query::parse_query(text);
    auto store = load_store(cfg);
    engine::infer_fixpoint(store, load_rules(cfg));
    const auto rows = query::eval_query(store, q);
    for (std::size_t i = 0; i < q.select.size(); ++i) out << (i ? "\t" : "") << '?' << q.select[i];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < q.select.size(); ++i) {
            out << (i ? "\t" : "") << row.at(q.select[i]).to_source();
        }
        out << '\n';
    }
    out << rows.size() << (rows.size() == 1 ? " row" : " rows") << '\n';
    return kExitOk;
}

int cmd_classify(const Config& cfg, std::ostream& out) {
    if (!cfg.events) throw ValidationError("classify needs --events");
    if (!cfg.model) throw ValidationError("classify needs --model");
    const auto model = behavior::load_model_file(*cfg.model, cfg.distance_floor);
    const auto events = behavior::load_events_file(*cfg.events);
    for (const auto& user : behavior::users_of(events)) {
        const auto fv = behavior::extract_features(events, user);
        const auto cls = model.classify(fv);
        out << user << " class=" << cls.class_id << " distance=" << fixed(cls.distance)
            << " trust=" << fixed(model.trust_score(cls.class_id, fv)) << '\n';
    }
    return kExitOk;
}

int cmd_scenario(const Config& cfg, const std::string& name, std::ostream& out) {
    const auto outcome = run_scenario(name, cfg);
    out << outcome.report;
    return outcome.passed ? kExitOk : kExitInvalid;
}

int cmd_serve(Config cfg, const std::string& listen, const std::vector<std::string>& preload,
              std::ostream& out, std::ostream& err) {
    std::vector<ScenarioFixture> fixtures;
    for (const auto& name : preload) fixtures.push_back(load_fixture(cfg.scenarios, name));
    // Preloaded fixtures share one policy and model; explicit paths win.
    if (!fixtures.empty()) {
        if (!cfg.rules) cfg.rules = fixtures.front().rules.string();
        if (!cfg.model) cfg.model = fixtures.front().model.string();
    }
    auto d = open_deployment(cfg);
    for (const auto& fixture : fixtures) {
        const std::string& name = fixture.name;
        std::ostringstream report;
        if (!apply_fixture(*d, fixture, false, report)) {
            err << report.str();
            throw ValidationError("preload of scenario '" + name + "' did not match its expectations");
        }
    }
    RequestHandler handler(*d);
    if (listen.empty() || listen == "-") {
        serve_stream(handler, std::cin, out);
        return kExitOk;
    }

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    SocketServer server(handler, listen);
    err << "listening on " << listen;
    if (server.port() != 0) err << " port " << server.port();
    err << '\n' << std::flush;
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });
    server.run();
    waiter.join();
    return kExitOk;
}

int cmd_hash_secret(const std::string& given, std::ostream& out) {
    std::string secret = given;
    if (secret.empty() && !std::getline(std::cin, secret)) {
        throw ValidationError("hash-secret needs a secret argument or one line on stdin");
    }
    if (secret.empty()) throw ValidationError("empty secret");
    out << credentials::hash_password(secret) << '\n';
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Context-aware access control for assisted-living deployments", "aal-guard"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", "aal-guard 1.0.0");

    Overrides o;
    app.add_option("--config", o.config_path, "Configuration file (key = value)");
    add_override(app, o, "facts", "Fact file");
    add_override(app, o, "rules", "Rule file");
    add_override(app, o, "events", "Sensor event CSV");
    add_override(app, o, "credentials", "Credentials file (user:kind:record)");
    add_override(app, o, "audit", "Audit log path");
    add_override(app, o, "model", "Behavior model checkpoint");
    add_override(app, o, "scenarios", "Scenario fixture directory");
    add_override(app, o, "trust_threshold", "Minimum trust for authentication, in [0,1]");
    add_override(app, o, "distance_floor", "Distance scale of the trust score, in seconds");
    add_override(app, o, "default_auth_mean", "Authentication mean when no rule selects one");
    app.add_option("--priority", o.priorities, "Capability priority, <capability>=<n>");

    auto* load = app.add_subcommand("load", "Parse inputs and report counts");
    std::string save_path;
    auto* infer = app.add_subcommand("infer", "Forward-chain the rules over the facts");
    infer->add_option("--save", save_path, "Write the materialized store to this fact file");
    std::string fact_text;
    auto* explain = app.add_subcommand("explain", "Print the derivation of one fact");
    explain->add_option("--fact", fact_text, "Fact, e.g. 'hasAccess(u1, permit)'")->required();
    std::string query_text;
    auto* query = app.add_subcommand("query", "Evaluate a SELECT query over the materialized store");
    query->add_option("text", query_text, "SELECT ?v WHERE { atom ^ ... } [LIMIT n]")->required();
    auto* classify = app.add_subcommand("classify", "Classify each user of an event stream");
    std::string scenario_name;
    auto* scenario = app.add_subcommand("scenario", "Run a scenario fixture end to end");
    scenario->add_option("name", scenario_name, "deaf, blind or alzheimer")->required();
    std::string listen = "-";
    std::vector<std::string> preload;
    auto* serve = app.add_subcommand("serve", "Answer newline-delimited JSON requests");
    serve->add_option("--listen", listen, "'-' for stdio, unix:<path> or <host>:<port>");
    serve->add_option("--preload", preload, "Scenario fixtures to load before serving");
    std::string secret;
    auto* hash = app.add_subcommand("hash-secret", "Print a salted password hash for a credentials file");
    hash->add_option("secret", secret, "Secret to hash; read from stdin when omitted");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = e.get_exit_code();
        if (code == 0) {
            if (dynamic_cast<const CLI::CallForVersion*>(&e)) {
                out << e.what() << '\n';
            } else {
                app.exit(e, out, err);
            }
            return kExitOk;
        }
        err << "aal-guard: " << e.what() << '\n';
        return kExitInvalid;
    }

    try {
        if (*hash) return cmd_hash_secret(secret, out);
        const Config cfg = build_config(o);
        if (*load) return cmd_load(cfg, out);
        if (*infer) return cmd_infer(cfg, save_path, out);
        if (*explain) return cmd_explain(cfg, fact_text, out);
        if (*query) return cmd_query(cfg, query_text, out);
        if (*classify) return cmd_classify(cfg, out);
        if (*scenario) return cmd_scenario(cfg, scenario_name, out);
        if (*serve) return cmd_serve(cfg, listen, preload, out, err);
    } catch (const IoError& e) {
        err << "aal-guard: " << e.what() << '\n';
        return kExitIo;
    } catch (const Error& e) {
        err << "aal-guard: " << e.what() << '\n';
        return kExitInvalid;
    }
    return kExitInvalid;
}

}  // namespace aalguard::cli
