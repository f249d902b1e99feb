#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "aalguard/audit.hpp"
#include "aalguard/error.hpp"

using namespace aalguard;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

audit::Entry entry(audit::Kind kind, std::string subject, std::string outcome, std::string detail) {
    return audit::Entry{0, 0, kind, std::move(subject), std::move(outcome), std::move(detail)};
}

struct TempFile {
    std::filesystem::path path = std::filesystem::temp_directory_path() /
                                 ("aalguard_audit_" + std::to_string(::getpid()) + ".log");
    ~TempFile() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("iso time") {
    CHECK(audit::iso_time(0) == "1970-01-01T00:00:00Z");
    CHECK(audit::iso_time(1760000000) == "2025-10-09T08:53:20Z");
    CHECK(audit::parse_iso_time("2025-10-09T08:53:20Z") == 1760000000);
    CHECK_THROWS_AS(audit::parse_iso_time("2025-13-09T08:53:20Z"), ParseError);
    CHECK_THROWS_AS(audit::parse_iso_time("yesterday"), ParseError);
}

TEST_CASE("entry format escapes separators") {
    const audit::Entry e{7, 0, audit::Kind::authz, "u|1", "deny", "a|b \\ c\nd\re"};
    const std::string line = audit::format_entry(e);
    CHECK(line == "7|1970-01-01T00:00:00Z|authz|u\\|1|deny|a\\|b \\\\ c\\nd\\re");
    CHECK(audit::parse_entry(line) == e);
    CHECK_THROWS_AS(audit::parse_entry("1|1970-01-01T00:00:00Z|authz|u|deny"), ParseError);
    CHECK_THROWS_AS(audit::parse_entry("x|1970-01-01T00:00:00Z|authz|u|deny|d"), ParseError);
    CHECK_THROWS_AS(audit::parse_entry("1|1970-01-01T00:00:00Z|bogus|u|deny|d"), ParseError);
    CHECK_THROWS_AS(audit::parse_entry("1|1970-01-01T00:00:00Z|authz|u|deny|d\\"), ParseError);
}

TEST_CASE("memory log numbering") {
    audit::AuditLog log(audit::stepping_clock(100));
    CHECK(log.record(entry(audit::Kind::authn, "u1", "yes", "")) == 1);
    CHECK(log.record(entry(audit::Kind::authz, "u1", "permit", "")) == 2);
    CHECK(log.record(entry(audit::Kind::anomaly, "u1", "flagged", "")) == 3);
    CHECK(log.entries()[0].time == 100);
    CHECK(log.entries()[2].time == 102);
}

TEST_CASE("file log appends and reloads") {
    TempFile tmp;
    {
        audit::AuditLog log(tmp.path.string(), audit::AuditLog::Mode::truncate, audit::stepping_clock(5));
        log.record(entry(audit::Kind::authn, "u1", "yes", "mean=username/password"));
        log.record(entry(audit::Kind::authz, "u1", "permit", "service=ReadAlert|x"));
    }
    const std::string first = slurp(tmp.path);
    {
        audit::AuditLog log(tmp.path.string(), audit::AuditLog::Mode::append, audit::stepping_clock(50));
        CHECK(log.entries().size() == 2);
        CHECK(log.record(entry(audit::Kind::authz, "u2", "deny", "")) == 3);
    }
    const std::string both = slurp(tmp.path);
    CHECK(both.substr(0, first.size()) == first);

    const auto entries = audit::load_log_file(tmp.path.string());
    REQUIRE(entries.size() == 3);
    for (std::size_t i = 0; i < entries.size(); ++i) CHECK(entries[i].seq == i + 1);
    std::string rewritten;
    for (const auto& e : entries) rewritten += audit::format_entry(e) + "\n";
    CHECK(rewritten == both);

    audit::AuditLog fresh(tmp.path.string(), audit::AuditLog::Mode::truncate, audit::stepping_clock(0));
    CHECK(fresh.entries().empty());
    CHECK(slurp(tmp.path).empty());
}

TEST_CASE("write failures") {
    audit::AuditLog full("/dev/full", audit::AuditLog::Mode::truncate, audit::stepping_clock(0));
    CHECK_THROWS_AS(full.record(entry(audit::Kind::authn, "u1", "yes", "")), audit::AppendError);
    CHECK(full.entries().empty());
    CHECK_THROWS_AS(audit::AuditLog("/nonexistent/dir/log", audit::AuditLog::Mode::truncate), IoError);
    CHECK_THROWS_AS(audit::load_log_file("/nonexistent/log"), IoError);
}
