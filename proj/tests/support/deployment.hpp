#pragma once

// A decision point over the scenario rules and behavior classes, with
// in-memory credentials and audit log, for the pdp-level tests.

#include <memory>
#include <string>

#include "aalguard/audit.hpp"
#include "aalguard/behavior.hpp"
#include "aalguard/credentials.hpp"
#include "aalguard/kb.hpp"
#include "aalguard/pdp.hpp"
#include "aalguard/rulelang.hpp"

namespace testbed {

using namespace aalguard;

inline const std::string& password_hash(const std::string& secret) {
    static std::map<std::string, std::string> cache;
    auto it = cache.find(secret);
    if (it == cache.end()) it = cache.emplace(secret, credentials::hash_password(secret)).first;
    return it->second;
}

struct Bed {
    kb::FactStore store;
    behavior::BehaviorModel model = behavior::load_model_file(AALGUARD_SCENARIO_DIR "/model.txt");
    credentials::CredentialsDb creds;
    audit::AuditLog log{audit::stepping_clock(1760000000)};
    std::unique_ptr<pdp::DecisionPoint> pdp;

    explicit Bed(std::vector<rules::Rule> rules = rules::parse_ruleset_file(AALGUARD_SCENARIO_DIR "/rules.swl"),
                 pdp::PolicyConfig config = {}) {
        pdp = std::make_unique<pdp::DecisionPoint>(store, std::move(rules), model, creds, log, std::move(config));
    }

    void resident(const std::string& user, const std::string& capability, const std::string& secret) {
        store.assert_fact(kb::Fact::make("HasCapability", {kb::Constant::symbol(user), kb::Constant::string(capability)}));
        creds.add(credentials::Record{user, credentials::Kind::password, password_hash(secret)});
    }

    behavior::FeatureVector centroid(const std::string& cls) const { return model.get(cls).centroid; }

    pdp::AuthnResult login(const std::string& user, const std::string& secret, const std::string& cls) {
        return pdp->authenticate(pdp::AuthnRequest{user, pdp::Credential{credentials::Kind::password, secret}, centroid(cls)});
    }
};

}  // namespace testbed
