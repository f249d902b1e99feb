#pragma once

// Security layer: authentication-mean selection and credential checks,
// authorization decisions with obligations and recommendations, and
// accounting (audit entries plus anomaly flagging).

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aalguard/audit.hpp"
#include "aalguard/behavior.hpp"
#include "aalguard/credentials.hpp"
#include "aalguard/kb.hpp"
#include "aalguard/rulelang.hpp"

namespace aalguard::pdp {

inline constexpr std::string_view kPasswordMean = "username/password";
inline constexpr std::string_view kTagMean = "tag-mean";

struct PolicyConfig {
    double trust_threshold = 0.5;
    std::string default_auth_mean{kPasswordMean};
    // Capability -> priority; lookups are case-insensitive, unknown maps to 0.
    std::map<std::string, int> priority_table{
        {"cognitive", 3}, {"visual", 2}, {"hearing", 2}, {"physical", 1}, {"none", 0}};
    std::string emergency_group = "Group3";
    std::string emergency_capability = "cognitive";
    std::string emergency_obligation = "signal-emergency";

    int priority_of(std::string_view capability) const;
};

struct Credential {
    credentials::Kind kind = credentials::Kind::password;
    std::string secret;
};

struct AuthnRequest {
    std::string user;
    std::optional<Credential> credential;
    behavior::FeatureVector features;
};

struct AuthnResult {
    bool authenticated = false;
    std::string mean_used;
    double trust = 0.0;
    double distance = 0.0;
    std::string behavior_class;
    std::string reason;  // empty when authenticated
    std::optional<std::string> audit_error;
};

struct RequestContext {
    std::optional<std::string> time;  // "HH.MM"
    std::optional<std::string> location;
    std::optional<std::string> activity;
    std::optional<std::string> environment;

    bool empty() const noexcept { return !time && !location && !activity && !environment; }
};

struct AuthzRequest {
    std::string user;
    std::string service;
    std::optional<std::string> device;
    RequestContext context;
};

enum class Effect { permit, deny };
std::string_view to_string(Effect effect);

struct Decision {
    Effect effect = Effect::deny;
    std::vector<std::string> obligations;
    std::vector<std::string> recommendations;
    int priority = 0;
    std::vector<std::string> rationale;  // deriving rule ids, or a default marker
    std::optional<std::string> audit_error;
};

struct AnomalyResult {
    bool flagged = false;
    double trust = 0.0;
    std::vector<std::string> obligations;
};

// True for "HH.MM" with two digits on each side.
bool valid_time(std::string_view text);

// Derives the authentication mean for a (capability, behavior class) pair
// from the `Authentication` rules in a scratch store. Several candidates:
// the one derived by the earliest rule wins; none: the configured default.
std::string select_auth_mean(std::string_view capability, std::string_view behavior_class,
                             const std::vector<rules::Rule>& rules, const PolicyConfig& config);

// Binds the knowledge base, policy rules, behavior model, credentials and
// audit log of one deployment. Mutating calls assume a single writer.
class DecisionPoint {
public:
    DecisionPoint(kb::FactStore& store, std::vector<rules::Rule> rules,
                  behavior::BehaviorModel& model, const credentials::CredentialsDb& credentials,
                  audit::AuditLog& log, PolicyConfig config = {});

    // Classify, score trust, pick the mean, verify the credential; records
    // Authenticated / HasRecognizedBehavior / TrustValue facts and one audit entry.
    AuthnResult authenticate(const AuthnRequest& request);

    // Runs the ruleset over the store and returns all BehaviorCapability facts.
    std::vector<kb::Fact> assign_group();

    // Deny-overrides, default deny, authentication gate. Evaluates over a
    // snapshot of the store plus the request facts; appends one audit entry.
    // Throws ValidationError for a malformed context time.
    Decision authorize(const AuthzRequest& request);

    // Flags when trust against the class drops below `threshold`. A flagged
    // user of the emergency group (or capability) gets the emergency obligation
    // asserted into the store.
    AnomalyResult detect_anomaly(std::string_view user, std::string_view class_id,
                                 const behavior::FeatureVector& recent, double threshold);

    const PolicyConfig& config() const noexcept { return config_; }
    const std::vector<rules::Rule>& rules() const noexcept { return rules_; }
    kb::FactStore& store() noexcept { return store_; }
    audit::AuditLog& log() noexcept { return log_; }

    // Highest priority over the user's capabilities.
    int priority_for(std::string_view user) const;
    std::vector<std::string> groups_of(std::string_view user) const;

private:
    std::optional<std::string> append(audit::Entry entry);
    std::optional<std::string> latest_capability(std::string_view user) const;

    kb::FactStore& store_;
    std::vector<rules::Rule> rules_;
    behavior::BehaviorModel& model_;
    const credentials::CredentialsDb& credentials_;
    audit::AuditLog& log_;
    PolicyConfig config_;
};

}  // namespace aalguard::pdp
