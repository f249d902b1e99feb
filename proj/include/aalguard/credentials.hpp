#pragma once

// Credential records: salted password hashes and tag tokens.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aalguard::credentials {

enum class Kind { password, tag };

std::string_view to_string(Kind kind);
std::optional<Kind> parse_kind(std::string_view text);

struct Record {
    std::string user;
    Kind kind = Kind::password;
    std::string record;  // password: salted hash string; tag: token
};

// Salted, memory-hard hash (argon2id via libsodium) in its standard string form.
std::string hash_password(std::string_view secret);

// Password: hash verification; tag: constant-time token comparison.
bool verify(std::string_view secret, const Record& record);

class CredentialsDb {
public:
    void add(Record record);
    const Record* find(std::string_view user, Kind kind) const;
    bool has_user(std::string_view user) const;
    const std::vector<Record>& records() const noexcept { return records_; }

    // Credentials file: `user:kind:record` lines, `#` comments.
    static CredentialsDb parse(std::string_view text);
    static CredentialsDb load_file(const std::string& path);
    std::string serialize() const;

private:
    std::vector<Record> records_;
};

}  // namespace aalguard::credentials
