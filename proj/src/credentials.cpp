#include "aalguard/credentials.hpp"

#include <sodium.h>

#include <fstream>
#include <sstream>

#include "aalguard/error.hpp"

namespace aalguard::credentials {
namespace {

void ensure_sodium() {
    static const int status = sodium_init();
    if (status < 0) throw Error("libsodium failed to initialize");
}

}  // namespace

std::string_view to_string(Kind kind) { return kind == Kind::password ? "password" : "tag"; }

std::optional<Kind> parse_kind(std::string_view text) {
    if (text == "password") return Kind::password;
    if (text == "tag") return Kind::tag;
    return std::nullopt;
}

std::string hash_password(std::string_view secret) {
    ensure_sodium();
    char out[crypto_pwhash_STRBYTES];
    if (crypto_pwhash_str(out, secret.data(), secret.size(), crypto_pwhash_OPSLIMIT_INTERACTIVE,
                          crypto_pwhash_MEMLIMIT_INTERACTIVE) != 0) {
        throw Error("password hashing ran out of memory");
    }
    return std::string(out);
}

bool verify(std::string_view secret, const Record& record) {
    ensure_sodium();
    if (secret.empty()) return false;
    if (record.kind == Kind::password) {
        return crypto_pwhash_str_verify(record.record.c_str(), secret.data(), secret.size()) == 0;
    }
    if (secret.size() != record.record.size()) return false;
    return sodium_memcmp(secret.data(), record.record.data(), secret.size()) == 0;
}

void CredentialsDb::add(Record record) {
    for (Record& r : records_) {
        if (r.user == record.user && r.kind == record.kind) {
            r = std::move(record);
            return;
        }
    }
    records_.push_back(std::move(record));
}

const Record* CredentialsDb::find(std::string_view user, Kind kind) const {
    for (const Record& r : records_) {
        if (r.user == user && r.kind == kind) return &r;
    }
    return nullptr;
}

bool CredentialsDb::has_user(std::string_view user) const {
    for (const Record& r : records_) {
        if (r.user == user) return true;
    }
    return false;
}

CredentialsDb CredentialsDb::parse(std::string_view text) {
    CredentialsDb db;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos <= text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        std::string line(text.substr(pos, eol - pos));
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty() && line.front() != '#') {
            const std::size_t a = line.find(':');
            const std::size_t b = a == std::string::npos ? a : line.find(':', a + 1);
            if (b == std::string::npos) {
                throw ParseError("expected 'user:kind:record'", line_no, pos);
            }
            const auto kind = parse_kind(std::string_view(line).substr(a + 1, b - a - 1));
            if (!kind) throw ParseError("unknown credential kind", line_no, pos + a + 1);
            Record r{line.substr(0, a), *kind, line.substr(b + 1)};
            if (r.user.empty() || r.record.empty()) {
                throw ParseError("empty user or record", line_no, pos);
            }
            db.add(std::move(r));
        }
        if (eol == text.size()) break;
        pos = eol + 1;
    }
    return db;
}

CredentialsDb CredentialsDb::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open credentials file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse(buf.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.detail(), e.line(), e.offset());
    }
}

std::string CredentialsDb::serialize() const {
    std::string out;
    for (const Record& r : records_) {
        out += r.user + ":" + std::string(to_string(r.kind)) + ":" + r.record + "\n";
    }
    return out;
}

}  // namespace aalguard::credentials
