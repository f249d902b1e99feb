#pragma once

// Append-only accounting log: `seq|iso-time|kind|subject|outcome|detail`.

#include <cstdint>
#include <functional>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aalguard/error.hpp"

namespace aalguard::audit {

enum class Kind { authn, authz, anomaly };

std::string_view to_string(Kind kind);
std::optional<Kind> parse_kind(std::string_view text);

struct Entry {
    std::uint64_t seq = 0;
    std::int64_t time = 0;  // seconds since epoch, UTC
    Kind kind = Kind::authn;
    std::string subject;
    std::string outcome;
    std::string detail;

    bool operator==(const Entry&) const = default;
};

class AppendError : public IoError {
public:
    using IoError::IoError;
};

using Clock = std::function<std::int64_t()>;

Clock system_clock();
// Deterministic clock for harness runs: start, start+1, ...
Clock stepping_clock(std::int64_t start);

std::string iso_time(std::int64_t epoch_seconds);
// Throws ParseError.
std::int64_t parse_iso_time(std::string_view text);

std::string format_entry(const Entry& entry);
Entry parse_entry(std::string_view line, std::size_t line_no = 1);
std::vector<Entry> parse_log(std::string_view text);
std::vector<Entry> load_log_file(const std::string& path);

class AuditLog {
public:
    enum class Mode { append, truncate };

    // Memory-only log.
    explicit AuditLog(Clock clock = system_clock());
    // File-backed log. In append mode existing entries are read back and
    // numbering continues after the last one.
    AuditLog(const std::string& path, Mode mode, Clock clock = system_clock());

    // Assigns the next seq and the clock time, persists the line and returns
    // the seq. Throws AppendError if the line could not be written; the
    // entry is then not part of the log.
    std::uint64_t record(Entry entry);

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    const std::optional<std::string>& path() const noexcept { return path_; }

private:
    Clock clock_;
    std::optional<std::string> path_;
    std::unique_ptr<std::ofstream> out_;
    std::vector<Entry> entries_;
    std::uint64_t next_seq_ = 1;
};

}  // namespace aalguard::audit
