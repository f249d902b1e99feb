// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "aalguard/audit.hpp"
#include "aalguard/behavior.hpp"
#include "aalguard/cli/scenario.hpp"
#include "aalguard/engine.hpp"
#include "aalguard/rulelang.hpp"
#include "support/corpus.hpp"
#include "support/deployment.hpp"
#include "support/oracles.hpp"

extern char** environ;

using namespace aalguard;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

const fs::path kScenarios = AALGUARD_SCENARIO_DIR;
const fs::path kGolden = fs::path(__FILE__).parent_path() / "golden";

struct Verdict {
    bool pass = true;
    std::string detail;

    // Keeps the first failure message.
    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path temp_path(const std::string& stem) {
    return fs::temp_directory_path() / ("aalguard_acc_" + stem + "_" + std::to_string(::getpid()));
}

kb::FactStore store_of(const std::vector<kb::Fact>& facts) {
    kb::FactStore s;
    for (const auto& f : facts) s.assert_fact(f);
    return s;
}

bool contains(const std::string& text, const std::string& needle) { return text.find(needle) != std::string::npos; }

// 1. Scenario goldens.
Verdict scenario_goldens() {
    Verdict v;
    const std::vector<std::pair<std::string, std::string>> decisions{
        {"deaf", "-> permit obligations=[] recommendations=[visual-alert]"},
        {"blind", "-> permit obligations=[] recommendations=[audible-alert]"},
        {"alzheimer", "u3 OpenDoor time=00.00 -> deny obligations=[signal-emergency]"},
    };
    for (const auto& [name, decision] : decisions) {
        const auto outcome = cli::run_scenario(name, cli::default_config());
        v.require(outcome.passed, name + " did not pass");
        v.require(contains(outcome.report, decision), name + " lacks '" + decision + "'");
        v.require(outcome.report == slurp(kGolden / (name + ".txt")), name + " report differs from golden");
    }
    v.detail = v.pass ? "deaf, blind, alzheimer match their goldens" : v.detail;
    return v;
}

// 2. Verbatim rule corpus.
Verdict rule_corpus() {
    Verdict v;
    std::size_t rules_seen = 0;
    for (const auto& e : corpus::verbatim()) {
        try {
            const auto rs = rules::parse_ruleset(e.text);
            v.require(rs.size() == e.rules, std::string(e.name) + ": wrong rule count");
            const auto back = rules::parse_ruleset(rules::format_ruleset(rs));
            v.require(back.size() == rs.size(), std::string(e.name) + ": round trip changed rule count");
            for (std::size_t i = 0; i < std::min(rs.size(), back.size()); ++i) {
                v.require(rules::structurally_equal(rs[i], back[i]), std::string(e.name) + ": round trip differs");
            }
            rules_seen += rs.size();
        } catch (const Error& err) {
            v.require(false, std::string(e.name) + ": " + err.what());
        }
    }
    std::size_t rejected = 0;
    for (const char* text : corpus::incomplete()) {
        try {
            rules::parse_ruleset(text);
        } catch (const ParseError&) {
            ++rejected;
        }
    }
    v.require(rejected == corpus::incomplete().size(), "an incomplete listing was accepted");
    if (v.pass) {
        v.detail = std::to_string(corpus::verbatim().size()) + " listings (" + std::to_string(rules_seen) +
                   " rules) parse and round-trip; " + std::to_string(rejected) + " incomplete listings rejected";
    }
    return v;
}

// 3. Semi-naive fixpoint against the naive oracle.
Verdict fixpoint_oracle() {
    Verdict v;
    oracle::InstanceGenerator gen(20261014);
    constexpr int kInstances = 250;
    int mismatches = 0;
    for (int i = 0; i < kInstances; ++i) {
        const auto inst = gen.next(30, 6, 8);
        auto store = store_of(inst.facts);
        engine::infer_fixpoint(store, inst.rules);
        oracle::FactSet start;
        for (const auto& f : inst.facts) start.insert(oracle::ground(f));
        if (oracle::to_set(store) != oracle::naive_fixpoint(start, inst.rules)) ++mismatches;
    }
    v.require(mismatches == 0, std::to_string(mismatches) + " mismatches");
    if (v.pass) v.detail = std::to_string(kInstances) + " instances, 0 mismatches";
    return v;
}

// 4. Monotonicity, idempotence, rule-order independence.
Verdict engine_properties() {
    Verdict v;
    oracle::InstanceGenerator gen(4242);
    constexpr int kInstances = 220;
    int mono = 0, idem = 0, order = 0;
    for (int i = 0; i < kInstances; ++i) {
        const auto inst = gen.next(30, 6, 8);
        auto store = store_of(inst.facts);
        engine::infer_fixpoint(store, inst.rules);
        const auto once = oracle::to_set(store);

        if (!engine::infer_fixpoint(store, inst.rules).derived.empty() || oracle::to_set(store) != once) ++idem;

        auto shuffled_rules = inst.rules;
        std::shuffle(shuffled_rules.begin(), shuffled_rules.end(), gen.rng());
        auto shuffled_facts = inst.facts;
        std::shuffle(shuffled_facts.begin(), shuffled_facts.end(), gen.rng());
        auto shuffled = store_of(shuffled_facts);
        engine::infer_fixpoint(shuffled, shuffled_rules);
        if (oracle::to_set(shuffled) != once) ++order;

        auto extra = gen.next(10, 1, 8).facts;
        auto more = inst.facts;
        more.insert(more.end(), extra.begin(), extra.end());
        auto bigger = store_of(more);
        engine::infer_fixpoint(bigger, inst.rules);
        const auto big = oracle::to_set(bigger);
        if (!std::includes(big.begin(), big.end(), once.begin(), once.end())) ++mono;
    }
    v.require(mono == 0, std::to_string(mono) + " monotonicity violations");
    v.require(idem == 0, std::to_string(idem) + " idempotence violations");
    v.require(order == 0, std::to_string(order) + " rule-order violations");
    if (v.pass) v.detail = std::to_string(kInstances) + " instances per property, 0 violations";
    return v;
}

behavior::FeatureVector fv(const std::map<std::string, double>& m) {
    behavior::FeatureVector f;
    f.entries = m;
    for (const auto& [k, x] : m) f.support[k] = 1;
    return f;
}

// 5. Classifier against brute force, incremental against batch mean.
Verdict classifier_oracle() {
    Verdict v;
    std::mt19937_64 rng(555);
    std::uniform_real_distribution<double> val(0, 2000);
    const std::vector<std::string> keys{"move:bedroom->kitchen", "move:kitchen->bedroom", "hold:cooking",
                                        "hold:reading", "hold:tv", "hold:sleeping"};
    auto random_map = [&] {
        std::map<std::string, double> m;
        for (const auto& k : keys) {
            if (rng() % 3) m[k] = std::round(val(rng) * 8) / 8;
        }
        return m;
    };
    constexpr int kModels = 150;
    int wrong = 0;
    for (int i = 0; i < kModels; ++i) {
        std::vector<behavior::BehaviorClass> classes;
        std::vector<std::map<std::string, double>> centroids;
        const std::size_t n = 1 + rng() % 6;
        for (std::size_t j = 0; j < n; ++j) {
            centroids.push_back(random_map());
            classes.push_back(behavior::BehaviorClass{"k" + std::to_string(j), fv(centroids.back()), 1});
        }
        const behavior::BehaviorModel model(classes);
        for (int probe = 0; probe < 5; ++probe) {
            const auto x = random_map();
            const auto got = model.classify(fv(x));
            const std::size_t want = oracle::nearest(centroids, x);
            if (got.class_id != "k" + std::to_string(want) ||
                std::abs(got.distance - oracle::distance(centroids[want], x)) > 1e-9) {
                ++wrong;
            }
        }
    }
    v.require(wrong == 0, std::to_string(wrong) + " classify disagreements");

    constexpr int kSequences = 150;
    double worst = 0;
    for (int i = 0; i < kSequences; ++i) {
        behavior::BehaviorModel model({behavior::BehaviorClass{"c", {}, 0}});
        std::vector<std::map<std::string, double>> xs;
        const std::size_t n = 1 + rng() % 60;
        for (std::size_t j = 0; j < n; ++j) {
            std::map<std::string, double> x;
            for (const auto& k : keys) x[k] = val(rng);
            xs.push_back(x);
            model.update_class("c", fv(x));
        }
        for (const auto& [k, want] : oracle::batch_mean(xs)) {
            worst = std::max(worst, std::abs(model.get("c").centroid.entries.at(k) - want));
        }
    }
    v.require(worst <= 1e-9, "incremental mean off by " + std::to_string(worst));
    if (v.pass) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%d models agree; %d sequences, max deviation %.3g", kModels, kSequences, worst);
        v.detail = buf;
    }
    return v;
}

pdp::AuthzRequest random_request(std::mt19937_64& rng, const std::string& user) {
    static const char* services[] = {"OpenDoor", "ReadAlert", "Lights", "Radio", "Oven", "CallNurse"};
    static const char* devices[] = {"VisualAid", "AudioAid", "Tablet", "Phone"};
    static const char* locations[] = {"kitchen", "bedroom", "entrance", "livingroom"};
    pdp::AuthzRequest r;
    r.user = user;
    r.service = services[rng() % 6];
    if (rng() % 2) r.device = devices[rng() % 4];
    if (rng() % 3) {
        char t[8];
        std::snprintf(t, sizeof t, "%02d.%02d", static_cast<int>(rng() % 24), static_cast<int>(rng() % 60));
        r.context.time = t;
    }
    if (rng() % 2) r.context.location = locations[rng() % 4];
    return r;
}

// 6. Default-deny, deny-overrides, authentication gate.
Verdict pdp_invariants() {
    Verdict v;
    std::mt19937_64 rng(66);
    const char* caps[] = {"no", "hearing", "visual", "cognitive", "physical"};

    {
        testbed::Bed bed(std::vector<rules::Rule>{});
        for (int u = 0; u < 5; ++u) {
            const std::string user = "u" + std::to_string(u);
            bed.resident(user, caps[u], "pw" + std::to_string(u));
            bed.login(user, "pw" + std::to_string(u), u % 2 ? "class2" : "class1");
        }
        int permits = 0;
        for (int i = 0; i < 50; ++i) {
            if (bed.pdp->authorize(random_request(rng, "u" + std::to_string(rng() % 5))).effect != pdp::Effect::deny) ++permits;
        }
        v.require(permits == 0, std::to_string(permits) + " of 50 requests permitted under an empty ruleset");
    }

    int overridden = 0;
    constexpr int kStores = 50;
    for (int i = 0; i < kStores; ++i) {
        std::string text;
        const int permits = 1 + static_cast<int>(rng() % 3);
        const int denies = 1 + static_cast<int>(rng() % 3);
        for (int p = 0; p < permits; ++p) {
            text += "@id: p" + std::to_string(p) + "\nAskedService(?u, ?s) ^ Marker" + std::to_string(p) +
                    "(?u) -> hasAccess(?u, ?s, permit).\n";
        }
        for (int d = 0; d < denies; ++d) {
            text += d % 2 ? "@id: d" + std::to_string(d) + "\nAskedService(?u, ?s) ^ Block" + std::to_string(d) +
                                "(?u) -> hasAccess(?u, \"Deny\").\n"
                          : "@id: d" + std::to_string(d) + "\nAskedService(?u, ?s) ^ Block" + std::to_string(d) +
                                "(?u) -> hasAccess(?u, ?s, deny).\n";
        }
        testbed::Bed bed(rules::parse_ruleset(text));
        bed.resident("u1", caps[rng() % 5], "pw");
        bed.login("u1", "pw", "class1");
        for (int p = 0; p < permits; ++p) bed.store.assert_fact(kb::Fact::make("Marker" + std::to_string(p), {kb::Constant::symbol("u1")}));
        const auto before = bed.pdp->authorize(random_request(rng, "u1"));
        v.require(before.effect == pdp::Effect::permit, "constructed permit store did not permit");
        for (int d = 0; d < denies; ++d) bed.store.assert_fact(kb::Fact::make("Block" + std::to_string(d), {kb::Constant::symbol("u1")}));
        if (bed.pdp->authorize(random_request(rng, "u1")).effect == pdp::Effect::deny) ++overridden;
    }
    v.require(overridden == kStores, std::to_string(kStores - overridden) + " permit+deny stores did not deny");

    {
        testbed::Bed bed(rules::parse_ruleset("AskedService(?u, ?s) -> hasAccess(?u, ?s, permit).\n"));
        for (int u = 0; u < 5; ++u) bed.resident("u" + std::to_string(u), caps[u], "pw" + std::to_string(u));
        bed.login("u1", "wrong", "class1");
        bed.store.assert_fact(kb::Fact::make("Authenticated", {kb::Constant::symbol("u2"), kb::Constant::symbol("no")}));
        bed.login("u3", "pw3", "class3");
        bed.login("u4", "pw4", "class2");
        int leaked = 0;
        std::size_t checked = 0;
        for (int i = 0; i < 50; ++i) {
            const std::string user = "u" + std::to_string(rng() % 5);
            const bool authenticated = bed.store.contains("Authenticated", {kb::Constant::symbol(user), kb::Constant::symbol("yes")});
            const auto d = bed.pdp->authorize(random_request(rng, user));
            if (!authenticated) {
                ++checked;
                if (d.effect == pdp::Effect::permit) ++leaked;
            }
        }
        v.require(leaked == 0, std::to_string(leaked) + " permits without Authenticated(u, yes)");
        v.require(checked > 0, "no unauthenticated request was generated");
        if (v.pass) {
            v.detail = "50/50 default-deny; " + std::to_string(kStores) + "/" + std::to_string(kStores) +
                       " deny-overrides; 0 of " + std::to_string(checked) + " unauthenticated requests permitted";
        }
    }
    return v;
}

// 7. Audit seq and reload after every scenario.
Verdict audit_integrity() {
    Verdict v;
    std::size_t total = 0;
    for (const auto& name : cli::scenario_names()) {
        const fs::path log = temp_path("audit_" + name);
        auto cfg = cli::default_config();
        cfg.audit = log.string();
        const auto outcome = cli::run_scenario(name, cfg);
        const auto entries = audit::load_log_file(log.string());
        v.require(!entries.empty(), name + ": empty audit log");
        for (std::size_t i = 0; i < entries.size(); ++i) {
            v.require(entries[i].seq == i + 1, name + ": seq gap at entry " + std::to_string(i + 1));
        }
        v.require(entries == outcome.audit, name + ": reloaded entries differ from the recorded ones");
        std::string rewritten;
        for (const auto& e : entries) rewritten += audit::format_entry(e) + "\n";
        v.require(rewritten == slurp(log), name + ": reload is not byte-identical");
        total += entries.size();
        fs::remove(log);
    }
    if (v.pass) v.detail = std::to_string(total) + " entries over 3 scenarios, gap-free, byte-identical reload";
    return v;
}

// 8. Feature extraction against the hand-computed table.
Verdict feature_oracle() {
    Verdict v;
    const auto events = behavior::load_events_file((kScenarios / "events_u1.csv").string());
    const auto table = oracle::parse_feature_table(slurp(kScenarios / "events_u1.oracle"));
    const auto users = behavior::users_of(events);
    v.require(users == std::vector<std::string>{"u1"}, "fixture stream is not a single-user stream");
    const auto fv = behavior::extract_features(events, "u1");
    v.require(fv.entries.size() == table.size(), "feature key count differs from the oracle table");
    for (const auto& [key, want] : table) {
        const auto it = fv.entries.find(key);
        if (it == fv.entries.end()) {
            v.require(false, "missing feature " + key);
            continue;
        }
        v.require(std::abs(it->second - want.first) <= 1e-9, key + " mean differs");
        v.require(fv.support.at(key) == want.second, key + " support differs");
    }
    if (v.pass) v.detail = std::to_string(table.size()) + " features match within 1e-9";
    return v;
}

class Client {
public:
    explicit Client(const fs::path& sock) {
        for (int attempt = 0; attempt < 200 && fd_ < 0; ++attempt) {
            const int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
            sockaddr_un addr{};
            addr.sun_family = AF_UNIX;
            std::snprintf(addr.sun_path, sizeof addr.sun_path, "%s", sock.c_str());
            if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) {
                fd_ = fd;
            } else {
                ::close(fd);
                std::this_thread::sleep_for(std::chrono::milliseconds(50));
            }
        }
    }
    ~Client() {
        if (fd_ >= 0) ::close(fd_);
    }
    bool connected() const { return fd_ >= 0; }

    // Sends one line and blocks for one response line; empty on a closed connection.
    std::string call(const std::string& line) {
        const std::string payload = line + "\n";
        if (::send(fd_, payload.data(), payload.size(), MSG_NOSIGNAL) != static_cast<ssize_t>(payload.size())) return {};
        std::string got;
        char c;
        while (::recv(fd_, &c, 1, 0) == 1) {
            if (c == '\n') return got;
            got += c;
        }
        return {};
    }

private:
    int fd_ = -1;
};

// 9. Scripted client against `aal-guard serve`.
Verdict serve_conformance() {
    Verdict v;
    const fs::path sock = temp_path("serve.sock");
    fs::remove(sock);
    const std::string listen = "unix:" + sock.string();
    std::vector<std::string> args{AALGUARD_CLI, "serve", "--listen", listen, "--preload", "deaf", "blind", "alzheimer"};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, "/dev/null", O_WRONLY, 0);
    pid_t pid = 0;
    const int rc = posix_spawn(&pid, argv[0], &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) {
        v.require(false, "cannot start " + args[0]);
        return v;
    }

    struct Expected {
        std::string request;
        std::optional<std::string> effect;  // nullopt: an error response
        std::vector<std::string> obligations;
        std::vector<std::string> recommendations;
    };
    const std::vector<Expected> script{
        {R"({"op":"authorize","user":"u1","service":"ReadAlert","device":"VisualAid","context":{"time":"10.30"}})",
         "permit", {}, {"visual-alert"}},
        {R"({"op":"authorize","user":"u2","service":"ReadAlert","device":"AudioAid","context":{"time":"11.00"}})",
         "permit", {}, {"audible-alert"}},
        {R"({"op":"authorize","user":"u3","service":)", std::nullopt, {}, {}},
        {R"({"op":"authorize","user":"u3","service":"OpenDoor","context":{"time":"00.00","location":"entrance"}})",
         "deny", {"signal-emergency"}, {}},
    };

    int decisions = 0, errors = 0;
    {
        Client client(sock);
        v.require(client.connected(), "could not connect to " + listen);
        for (std::size_t i = 0; v.pass && i < script.size(); ++i) {
            const auto& step = script[i];
            const std::string line = client.call(step.request);
            const std::string where = "response " + std::to_string(i + 1);
            json resp;
            try {
                resp = json::parse(line);
            } catch (const json::exception&) {
                v.require(false, where + " is not JSON: '" + line + "'");
                break;
            }
            if (!step.effect) {
                v.require(resp.value("ok", true) == false && resp.contains("error"), where + " is not an error");
                ++errors;
                continue;
            }
            v.require(resp.value("ok", false) == true, where + " failed: " + line);
            v.require(resp.value("effect", "") == *step.effect, where + " has the wrong effect: " + line);
            v.require(resp.value("obligations", json::array()) == json(step.obligations), where + " obligations: " + line);
            v.require(resp.value("recommendations", json::array()) == json(step.recommendations),
                      where + " recommendations: " + line);
            if (v.pass) ++decisions;
        }
        if (v.pass) {
            const std::string pong = client.call(R"({"op":"ping"})");
            v.require(!pong.empty() && json::parse(pong).value("ok", false), "connection did not survive the script");
        }
    }

    ::kill(pid, SIGTERM);
    int status = 0;
    ::waitpid(pid, &status, 0);
    v.require(WIFEXITED(status) && WEXITSTATUS(status) == 0, "server did not shut down cleanly");
    fs::remove(sock);
    if (v.pass) {
        v.detail = std::to_string(decisions) + " correct decisions, " + std::to_string(errors) +
                   " error response, in order, connection kept";
    }
    return v;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"scenario goldens", scenario_goldens},
        {"verbatim rule corpus", rule_corpus},
        {"fixpoint oracle equivalence", fixpoint_oracle},
        {"engine properties", engine_properties},
        {"classifier oracle", classifier_oracle},
        {"pdp invariants", pdp_invariants},
        {"audit integrity", audit_integrity},
        {"feature extraction oracle", feature_oracle},
        {"serve-mode conformance", serve_conformance},
    };
    const auto start = std::chrono::steady_clock::now();
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("exception: ") + e.what();
        }
        if (!v.pass) ++failed;
        std::cout << "criterion " << i + 1 << " (" << criteria[i].first << "): " << (v.pass ? "PASS" : "FAIL")
                  << " - " << v.detail << std::endl;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu criteria, %d failed, %.2f s", criteria.size(), failed, secs);
    std::cout << buf << std::endl;
    return failed == 0 && secs < 60.0 ? 0 : 1;
}
