#pragma once

// Flat `key = value` configuration. Keys: facts, rules, events, credentials,
// audit, model, scenarios, trust_threshold, distance_floor,
// default_auth_mean, priority.<capability>.

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "aalguard/pdp.hpp"

namespace aalguard::cli {

inline constexpr std::string_view kConfigEnv = "AALGUARD_CONFIG";
inline constexpr std::string_view kDefaultConfigPath = "aal-guard.conf";

struct Config {
    std::optional<std::string> facts;
    std::optional<std::string> rules;
    std::optional<std::string> events;
    std::optional<std::string> credentials;
    std::optional<std::string> audit;
    std::optional<std::string> model;
    std::string scenarios;
    double trust_threshold = 0.5;
    double distance_floor = 30.0;
    std::string default_auth_mean{pdp::kPasswordMean};
    std::map<std::string, int> priority_table = pdp::PolicyConfig{}.priority_table;

    // Throws ValidationError for an unknown key or a malformed value.
    void set(std::string_view key, std::string_view value);
    // Threshold in [0,1], floor > 0, priorities >= 0.
    void validate() const;

    pdp::PolicyConfig policy() const;
};

Config default_config();
// Applies `key = value` lines over `base`; `#` comments, blank lines ignored.
Config parse_config(std::string_view text, Config base = default_config());
Config load_config_file(const std::string& path, Config base = default_config());

// --config path if given, else $AALGUARD_CONFIG, else ./aal-guard.conf when
// present, else defaults. Explicit paths that do not exist raise IoError.
Config resolve_config(const std::optional<std::string>& explicit_path);

}  // namespace aalguard::cli
