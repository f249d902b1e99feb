#pragma once

// Wiring of the three layers (acquisition -> management -> security) and the
// scenario fixtures that exercise them end to end.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "aalguard/audit.hpp"
#include "aalguard/behavior.hpp"
#include "aalguard/cli/config.hpp"
#include "aalguard/credentials.hpp"
#include "aalguard/kb.hpp"
#include "aalguard/pdp.hpp"
#include "aalguard/rulelang.hpp"

namespace aalguard::cli {

// One running instance: knowledge base, policy, behavior model, credentials,
// audit log and the decision point bound to them. Not movable, the decision
// point holds references into it.
struct Deployment {
    kb::FactStore store;
    behavior::BehaviorModel model;
    credentials::CredentialsDb credentials;
    std::unique_ptr<audit::AuditLog> log;
    std::unique_ptr<pdp::DecisionPoint> pdp;
    // Per-user features from the profile stream and the recent stream.
    std::map<std::string, behavior::FeatureVector> profile_features;
    std::map<std::string, behavior::FeatureVector> recent_features;

    Deployment() = default;
    Deployment(const Deployment&) = delete;
    Deployment& operator=(const Deployment&) = delete;
};

std::unique_ptr<Deployment> make_deployment(kb::FactStore store, std::vector<rules::Rule> rules,
                                            behavior::BehaviorModel model,
                                            credentials::CredentialsDb credentials,
                                            std::unique_ptr<audit::AuditLog> log,
                                            const Config& config);

// Deployment from the configured paths; missing paths give empty parts.
// The audit log is opened for append when `audit` is set.
std::unique_ptr<Deployment> open_deployment(const Config& config);

struct ScenarioStep {
    enum class Kind { authn, group, anomaly, authorize };

    Kind kind = Kind::authn;
    std::string user;
    std::optional<pdp::Credential> credential;  // authn
    pdp::AuthzRequest authz;                    // authorize

    std::optional<bool> expect_authenticated;
    std::optional<std::string> expect_mean;
    std::optional<std::vector<std::string>> expect_groups;
    std::optional<bool> expect_flagged;
    std::optional<pdp::Effect> expect_effect;
    std::optional<std::vector<std::string>> expect_obligations;
    std::optional<std::vector<std::string>> expect_recommendations;
};

struct ScenarioFixture {
    std::string name;
    std::filesystem::path facts;
    std::filesystem::path rules;
    std::filesystem::path events;
    std::optional<std::filesystem::path> recent_events;
    std::filesystem::path model;
    std::filesystem::path credentials;
    std::int64_t clock_start = 0;
    std::vector<ScenarioStep> steps;
};

const std::vector<std::string>& scenario_names();

// Reads <dir>/<name>/scenario.json; paths resolve relative to it.
// Throws NotFoundError for an unknown name.
ScenarioFixture load_fixture(const std::filesystem::path& scenarios_dir, const std::string& name);

// Loads the fixture's facts, credentials and event streams into `d`, then
// runs its steps in order (authorize steps only when `run_authorize`),
// writing one report line per step. True iff every expectation held.
bool apply_fixture(Deployment& d, const ScenarioFixture& fixture, bool run_authorize,
                   std::ostream& report);

struct ScenarioOutcome {
    bool passed = false;
    std::string report;
    std::vector<audit::Entry> audit;
};

// Full pipeline on a fresh deployment. The audit log goes to `config.audit`
// (truncated) when set, memory otherwise.
ScenarioOutcome run_scenario(const std::string& name, const Config& config);

}  // namespace aalguard::cli
