#include "aalguard/cli/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aalguard/error.hpp"

#ifndef AALGUARD_SCENARIO_DIR
#define AALGUARD_SCENARIO_DIR "scenarios"
#endif

namespace aalguard::cli {
namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

double to_double(std::string_view key, std::string_view value) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || p != value.data() + value.size() || !std::isfinite(v)) {
        throw ValidationError("config key '" + std::string(key) + "' needs a number, got '" +
                              std::string(value) + "'");
    }
    return v;
}

int to_int(std::string_view key, std::string_view value) {
    int v = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || p != value.data() + value.size()) {
        throw ValidationError("config key '" + std::string(key) + "' needs an integer, got '" +
                              std::string(value) + "'");
    }
    return v;
}

}  // namespace

void Config::set(std::string_view raw_key, std::string_view raw_value) {
    std::string key = trim(raw_key);
    for (char& c : key) {
        if (c == '-') c = '_';
    }
    const std::string value = trim(raw_value);
    if (key == "facts") facts = value;
    else if (key == "rules") rules = value;
    else if (key == "events") events = value;
    else if (key == "credentials") credentials = value;
    else if (key == "audit") audit = value;
    else if (key == "model") model = value;
    else if (key == "scenarios") scenarios = value;
    else if (key == "trust_threshold") trust_threshold = to_double(key, value);
    else if (key == "distance_floor") distance_floor = to_double(key, value);
    else if (key == "default_auth_mean") default_auth_mean = value;
    else if (key.rfind("priority.", 0) == 0 && key.size() > 9) priority_table[key.substr(9)] = to_int(key, value);
    else throw ValidationError("unknown config key '" + key + "'");
}

void Config::validate() const {
    if (!(trust_threshold >= 0.0 && trust_threshold <= 1.0)) {
        throw ValidationError("trust_threshold must lie in [0, 1]");
    }
    if (!(distance_floor > 0.0)) throw ValidationError("distance_floor must be positive");
    for (const auto& [cap, p] : priority_table) {
        if (p < 0) throw ValidationError("priority." + cap + " must be non-negative");
    }
    if (default_auth_mean.empty()) throw ValidationError("default_auth_mean must not be empty");
}

pdp::PolicyConfig Config::policy() const {
    pdp::PolicyConfig p;
    p.trust_threshold = trust_threshold;
    p.default_auth_mean = default_auth_mean;
    p.priority_table = priority_table;
    return p;
}

Config default_config() {
    Config c;
    c.scenarios = AALGUARD_SCENARIO_DIR;
    return c;
}

Config parse_config(std::string_view text, Config base) {
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos <= text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        std::string line(text.substr(pos, eol - pos));
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (!trim(line).empty()) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no, pos);
            try {
                base.set(line.substr(0, eq), line.substr(eq + 1));
            } catch (const ValidationError& e) {
                throw ParseError(e.what(), line_no, pos);
            }
        }
        if (eol == text.size()) break;
        pos = eol + 1;
    }
    return base;
}

Config load_config_file(const std::string& path, Config base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_config(buf.str(), std::move(base));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.detail(), e.line(), e.offset());
    }
}

Config resolve_config(const std::optional<std::string>& explicit_path) {
    if (explicit_path) return load_config_file(*explicit_path);
    if (const char* env = std::getenv(std::string(kConfigEnv).c_str()); env && *env) {
        return load_config_file(env);
    }
    if (std::filesystem::exists(std::string(kDefaultConfigPath))) {
        return load_config_file(std::string(kDefaultConfigPath));
    }
    return default_config();
}

}  // namespace aalguard::cli
