#include <doctest.h>

#include <random>

#include "aalguard/error.hpp"
#include "aalguard/pdp.hpp"
#include "support/deployment.hpp"

using namespace aalguard;
using testbed::Bed;
using kb::Constant;
using kb::Fact;

namespace {

const std::vector<rules::Rule>& fixture_rules() {
    static const auto rules = rules::parse_ruleset_file(AALGUARD_SCENARIO_DIR "/rules.swl");
    return rules;
}

pdp::AuthzRequest request(const std::string& user, const std::string& service,
                          std::optional<std::string> device = std::nullopt, std::optional<std::string> time = std::nullopt) {
    pdp::AuthzRequest r;
    r.user = user;
    r.service = service;
    r.device = std::move(device);
    r.context.time = std::move(time);
    return r;
}

}  // namespace

TEST_CASE("select_auth_mean") {
    const pdp::PolicyConfig config;
    CHECK(pdp::select_auth_mean("no", "class1", fixture_rules(), config) == "username/password");
    CHECK(pdp::select_auth_mean("physical", "class2", fixture_rules(), config) == "tag-mean");
    CHECK(pdp::select_auth_mean("hearing", "class1", fixture_rules(), config) == "username/password");

    pdp::PolicyConfig custom;
    custom.default_auth_mean = "fallback-mean";
    CHECK(pdp::select_auth_mean("visual", "class3", fixture_rules(), custom) == "fallback-mean");
    CHECK(pdp::select_auth_mean("visual", "class3", {}, custom) == "fallback-mean");

    const auto both = rules::parse_ruleset(
        "@id: late\nHasCapability(?u, \"x\") -> Authentication(late-mean).\n");
    auto ordered = rules::parse_ruleset("@id: early\nHasCapability(?u, \"x\") -> Authentication(early-mean).\n");
    ordered.insert(ordered.end(), both.begin(), both.end());
    CHECK(pdp::select_auth_mean("x", "class1", ordered, config) == "early-mean");
    std::reverse(ordered.begin(), ordered.end());
    CHECK(pdp::select_auth_mean("x", "class1", ordered, config) == "late-mean");
}

TEST_CASE("authenticate") {
    Bed bed;
    bed.resident("u1", "no", "pw-u1");
    bed.store.assert_fact(Fact::make("HasCapability", {Constant::symbol("u4"), Constant::string("physical")}));
    bed.creds.add(credentials::Record{"u4", credentials::Kind::tag, "TAG-0042"});

    SUBCASE("known user at the class centroid") {
        const auto r = bed.login("u1", "pw-u1", "class1");
        CHECK(r.authenticated);
        CHECK(r.mean_used == "username/password");
        CHECK(r.trust == 1.0);
        CHECK(r.behavior_class == "class1");
        CHECK(r.reason.empty());
        CHECK(bed.store.contains("Authenticated", {Constant::symbol("u1"), Constant::symbol("yes")}));
        CHECK(bed.store.contains("HasRecognizedBehavior", {Constant::symbol("u1"), Constant::symbol("class1")}));
        REQUIRE(bed.log.entries().size() == 1);
        CHECK(bed.log.entries()[0].kind == audit::Kind::authn);
        CHECK(bed.log.entries()[0].outcome == "yes");
    }
    SUBCASE("behavior far from every class") {
        behavior::FeatureVector odd;
        odd.entries["move:attic->garden"] = 5000;
        const auto r = bed.pdp->authenticate({"u1", pdp::Credential{credentials::Kind::password, "pw-u1"}, odd});
        CHECK_FALSE(r.authenticated);
        CHECK(r.trust < 0.5);
        CHECK(r.reason == "trust below threshold");
        CHECK(bed.store.contains("Authenticated", {Constant::symbol("u1"), Constant::symbol("no")}));
    }
    SUBCASE("tag mean for a physically impaired class2 user") {
        const auto r = bed.pdp->authenticate({"u4", pdp::Credential{credentials::Kind::tag, "TAG-0042"}, bed.centroid("class2")});
        CHECK(r.authenticated);
        CHECK(r.mean_used == "tag-mean");
        const auto wrong = bed.pdp->authenticate({"u4", pdp::Credential{credentials::Kind::password, "TAG-0042"}, bed.centroid("class2")});
        CHECK_FALSE(wrong.authenticated);
        CHECK_FALSE(bed.store.contains("Authenticated", {Constant::symbol("u4"), Constant::symbol("yes")}));
    }
    SUBCASE("rejections are results") {
        CHECK(bed.login("u1", "wrong", "class1").reason == "credential rejected");
        bed.store.assert_fact(Fact::make("HasCapability", {Constant::symbol("ghost"), Constant::string("no")}));
        CHECK(bed.login("ghost", "pw", "class1").reason == "unknown user");
        CHECK(bed.login("nobody", "pw", "class1").reason == "no capability profile");
        CHECK(bed.pdp->authenticate({"u1", std::nullopt, bed.centroid("class1")}).reason == "no credential presented");
        CHECK(bed.log.entries().size() == 4);
        for (const auto& e : bed.log.entries()) CHECK(e.outcome == "no");
    }
    SUBCASE("a later login replaces the earlier outcome") {
        CHECK(bed.login("u1", "pw-u1", "class1").authenticated);
        CHECK_FALSE(bed.login("u1", "bad", "class1").authenticated);
        CHECK_FALSE(bed.store.contains("Authenticated", {Constant::symbol("u1"), Constant::symbol("yes")}));
    }
}

TEST_CASE("assign_group") {
    Bed bed;
    bed.resident("u1", "hearing", "a");
    bed.resident("u2", "visual", "b");
    bed.resident("u3", "cognitive", "c");
    bed.login("u1", "a", "class1");
    bed.login("u2", "b", "class2");
    bed.login("u3", "c", "class2");
    const auto facts = bed.pdp->assign_group();
    CHECK(facts.size() == 3);
    CHECK(bed.pdp->groups_of("u1") == std::vector<std::string>{"Group1"});
    CHECK(bed.pdp->groups_of("u2") == std::vector<std::string>{"Group2"});
    CHECK(bed.pdp->groups_of("u3") == std::vector<std::string>{"Group3"});
}

TEST_CASE("authorize over the scenario rules") {
    Bed bed;
    bed.resident("u1", "hearing", "a");
    bed.resident("u2", "visual", "b");
    bed.resident("u3", "cognitive", "c");
    bed.login("u1", "a", "class1");
    bed.login("u2", "b", "class2");
    bed.login("u3", "c", "class2");
    bed.pdp->assign_group();

    const auto deaf = bed.pdp->authorize(request("u1", "ReadAlert", "VisualAid", "10.30"));
    CHECK(deaf.effect == pdp::Effect::permit);
    CHECK(deaf.recommendations == std::vector<std::string>{"visual-alert"});
    CHECK(deaf.priority == 2);
    CHECK(deaf.rationale == std::vector<std::string>{"authz.deaf"});

    const auto blind = bed.pdp->authorize(request("u2", "ReadAlert", "AudioAid", "11.00"));
    CHECK(blind.effect == pdp::Effect::permit);
    CHECK(blind.recommendations == std::vector<std::string>{"audible-alert"});

    const auto door = bed.pdp->authorize(request("u3", "OpenDoor", std::nullopt, "00.00"));
    CHECK(door.effect == pdp::Effect::deny);
    CHECK(door.priority == 3);
    CHECK(door.rationale == std::vector<std::string>{"authz.alzheimer"});

    SUBCASE("wrong device or service falls to default deny") {
        const auto d = bed.pdp->authorize(request("u1", "ReadAlert", "AudioAid", "10.30"));
        CHECK(d.effect == pdp::Effect::deny);
        CHECK(d.rationale == std::vector<std::string>{"default-deny"});
        CHECK(d.recommendations.empty());
        CHECK(bed.pdp->authorize(request("u3", "OpenDoor", std::nullopt, "14.00")).effect == pdp::Effect::deny);
    }
    SUBCASE("request facts do not leak into the store") {
        CHECK_FALSE(bed.store.contains("AskedService", {Constant::symbol("u1"), Constant::symbol("ReadAlert")}));
        CHECK(bed.store.with_predicate("hasAccess").empty());
        const auto again = bed.pdp->authorize(request("u1", "OtherService", std::nullopt, "10.30"));
        CHECK(again.effect == pdp::Effect::deny);
    }
    SUBCASE("one audit entry per call") {
        CHECK(bed.log.entries().size() == 6);
        CHECK(bed.log.entries().back().kind == audit::Kind::authz);
        CHECK(bed.log.entries().back().outcome == "deny");
    }
    SUBCASE("malformed time") {
        CHECK_THROWS_AS(bed.pdp->authorize(request("u1", "ReadAlert", "VisualAid", "10:30")), ValidationError);
        CHECK_THROWS_AS(bed.pdp->authorize(request("u1", "ReadAlert", "VisualAid", "1.30")), ValidationError);
    }
}

TEST_CASE("authentication gate") {
    Bed bed(rules::parse_ruleset("HasCapability(?u, ?c) -> hasAccess(?u, permit)."));
    bed.resident("u1", "no", "a");
    auto d = bed.pdp->authorize(request("u1", "Anything"));
    CHECK(d.effect == pdp::Effect::deny);
    CHECK(d.rationale == std::vector<std::string>{"not-authenticated"});

    bed.store.assert_fact(Fact::make("Authenticated", {Constant::symbol("u1"), Constant::symbol("no")}));
    CHECK(bed.pdp->authorize(request("u1", "Anything")).effect == pdp::Effect::deny);

    bed.login("u1", "a", "class1");
    CHECK(bed.pdp->authorize(request("u1", "Anything")).effect == pdp::Effect::permit);
}

TEST_CASE("deny overrides permit") {
    Bed bed(rules::parse_ruleset(
        "@id: p\nAskedService(?u, ?s) -> hasAccess(?u, ?s, permit).\n"
        "@id: d\nAskedService(?u, OpenDoor) ^ HasContext(?u, \"00.00\") -> hasAccess(?u, \"Deny\").\n"));
    bed.resident("u1", "no", "a");
    bed.login("u1", "a", "class1");
    CHECK(bed.pdp->authorize(request("u1", "OpenDoor", std::nullopt, "12.00")).effect == pdp::Effect::permit);
    const auto d = bed.pdp->authorize(request("u1", "OpenDoor", std::nullopt, "00.00"));
    CHECK(d.effect == pdp::Effect::deny);
    CHECK(d.rationale == std::vector<std::string>{"d"});

    bed.store.assert_fact(Fact::make("hasAccess", {Constant::symbol("u1"), Constant::symbol("Lights"), Constant::symbol("DENY")}));
    CHECK(bed.pdp->authorize(request("u1", "Lights")).effect == pdp::Effect::deny);
    CHECK(bed.pdp->authorize(request("u1", "Radio")).effect == pdp::Effect::permit);
}

TEST_CASE("default deny with no rules") {
    Bed bed(std::vector<rules::Rule>{});
    bed.resident("u1", "no", "a");
    bed.login("u1", "a", "class1");
    std::mt19937_64 rng(1);
    for (int i = 0; i < 50; ++i) {
        const auto d = bed.pdp->authorize(request("u1", "S" + std::to_string(rng() % 10)));
        CHECK(d.effect == pdp::Effect::deny);
        CHECK(d.rationale == std::vector<std::string>{"default-deny"});
    }
}

TEST_CASE("latest context wins") {
    Bed bed(rules::parse_ruleset("AskedService(?u, Lamp) ^ HasContext(?u, \"night\") -> hasAccess(?u, permit)."));
    bed.resident("u1", "no", "a");
    bed.login("u1", "a", "class1");
    bed.store.assert_fact(Fact::make("HasContext", {Constant::symbol("u1"), Constant::string("night")}));
    bed.store.assert_fact(Fact::make("HasContext", {Constant::symbol("u1"), Constant::string("day")}));
    CHECK(bed.pdp->authorize(request("u1", "Lamp")).effect == pdp::Effect::deny);
    auto r = request("u1", "Lamp");
    r.context.environment = "night";
    CHECK(bed.pdp->authorize(r).effect == pdp::Effect::permit);
}

TEST_CASE("priority") {
    pdp::PolicyConfig config;
    CHECK(config.priority_of("Cognitive") == 3);
    CHECK(config.priority_of("visual") == 2);
    CHECK(config.priority_of("hearing") == 2);
    CHECK(config.priority_of("physical") == 1);
    CHECK(config.priority_of("none") == 0);
    CHECK(config.priority_of("unlisted") == 0);
    Bed bed;
    bed.resident("u1", "hearing", "a");
    bed.resident("u1", "cognitive", "a");
    CHECK(bed.pdp->priority_for("u1") == 3);
}

TEST_CASE("detect_anomaly") {
    Bed bed;
    bed.resident("u3", "cognitive", "c");
    bed.resident("u5", "no", "e");

    const auto same = bed.pdp->detect_anomaly("u3", "class2", bed.centroid("class2"), 0.5);
    CHECK_FALSE(same.flagged);
    CHECK(same.trust == 1.0);
    CHECK(bed.log.entries().empty());

    behavior::FeatureVector wandering;
    wandering.entries["move:livingroom->entrance"] = 300;
    wandering.entries["move:entrance->kitchen"] = 600;
    CHECK_FALSE(bed.pdp->detect_anomaly("u3", "class2", wandering, 0.0).flagged);

    const auto flagged = bed.pdp->detect_anomaly("u3", "class2", wandering, 0.5);
    CHECK(flagged.flagged);
    CHECK(flagged.obligations == std::vector<std::string>{"signal-emergency"});
    CHECK(bed.store.contains("Obligation", {Constant::symbol("u3"), Constant::symbol("signal-emergency")}));
    REQUIRE(bed.log.entries().size() == 1);
    CHECK(bed.log.entries()[0].kind == audit::Kind::anomaly);

    const auto other = bed.pdp->detect_anomaly("u5", "class1", wandering, 0.5);
    CHECK(other.flagged);
    CHECK(other.obligations.empty());
    CHECK_THROWS_AS(bed.pdp->detect_anomaly("u5", "classX", wandering, 0.5), NotFoundError);
}

TEST_CASE("a failing audit sink does not change decisions") {
    kb::FactStore store;
    auto model = behavior::load_model_file(AALGUARD_SCENARIO_DIR "/model.txt");
    credentials::CredentialsDb creds;
    creds.add({"u1", credentials::Kind::password, testbed::password_hash("a")});
    store.assert_fact(Fact::make("HasCapability", {Constant::symbol("u1"), Constant::string("no")}));
    audit::AuditLog log("/dev/full", audit::AuditLog::Mode::truncate, audit::stepping_clock(0));
    pdp::DecisionPoint point(store, rules::parse_ruleset("Authenticated(?u, yes) -> hasAccess(?u, permit)."), model, creds, log);
    const auto r = point.authenticate({"u1", pdp::Credential{credentials::Kind::password, "a"}, model.get("class1").centroid});
    CHECK(r.authenticated);
    CHECK(r.audit_error);
    const auto d = point.authorize(request("u1", "X"));
    CHECK(d.effect == pdp::Effect::permit);
    CHECK(d.audit_error);
    CHECK(log.entries().empty());
}

TEST_CASE("construction checks") {
    pdp::PolicyConfig bad;
    bad.trust_threshold = 1.5;
    CHECK_THROWS_AS(Bed(std::vector<rules::Rule>{}, bad), ValidationError);
    CHECK_THROWS_AS(Bed(rules::parse_ruleset("P(?x) -> Q(?y).")), ValidationError);
    CHECK(pdp::valid_time("00.00"));
    CHECK_FALSE(pdp::valid_time("0.00"));
    CHECK_FALSE(pdp::valid_time("00:00"));
}
