#include "aalguard/audit.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <sstream>

namespace aalguard::audit {
namespace {

std::string escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '|': out += "\\|"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

// Splits on unescaped '|' and unescapes each field.
std::vector<std::string> split_fields(std::string_view line, std::size_t line_no) {
    std::vector<std::string> fields(1);
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (c == '\\') {
            if (i + 1 >= line.size()) throw ParseError("dangling escape", line_no, i);
            const char e = line[++i];
            fields.back().push_back(e == 'n' ? '\n' : e == 'r' ? '\r' : e);
        } else if (c == '|') {
            fields.emplace_back();
        } else {
            fields.back().push_back(c);
        }
    }
    return fields;
}

}  // namespace

std::string_view to_string(Kind kind) {
    switch (kind) {
        case Kind::authn: return "authn";
        case Kind::authz: return "authz";
        case Kind::anomaly: return "anomaly";
    }
    return "?";
}

std::optional<Kind> parse_kind(std::string_view text) {
    if (text == "authn") return Kind::authn;
    if (text == "authz") return Kind::authz;
    if (text == "anomaly") return Kind::anomaly;
    return std::nullopt;
}

Clock system_clock() {
    return [] {
        return std::chrono::duration_cast<std::chrono::seconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    };
}

Clock stepping_clock(std::int64_t start) {
    auto next = std::make_shared<std::int64_t>(start);
    return [next] { return (*next)++; };
}

std::string iso_time(std::int64_t epoch_seconds) {
    const std::time_t t = static_cast<std::time_t>(epoch_seconds);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::int64_t parse_iso_time(std::string_view text) {
    std::tm tm{};
    const std::string s(text);
    std::istringstream in(s);
    char dash1, dash2, t, colon1, colon2, z;
    in >> tm.tm_year >> dash1 >> tm.tm_mon >> dash2 >> tm.tm_mday >> t >> tm.tm_hour >> colon1 >>
        tm.tm_min >> colon2 >> tm.tm_sec >> z;
    if (!in || dash1 != '-' || dash2 != '-' || t != 'T' || colon1 != ':' || colon2 != ':' ||
        z != 'Z' || in.peek() != std::char_traits<char>::eof()) {
        throw ParseError("malformed timestamp '" + s + "'", 1, 0);
    }
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    const std::int64_t value = timegm(&tm);
    if (iso_time(value) != s) throw ParseError("timestamp out of range '" + s + "'", 1, 0);
    return value;
}

std::string format_entry(const Entry& e) {
    return std::to_string(e.seq) + "|" + iso_time(e.time) + "|" + std::string(to_string(e.kind)) +
           "|" + escape(e.subject) + "|" + escape(e.outcome) + "|" + escape(e.detail);
}

Entry parse_entry(std::string_view line, std::size_t line_no) {
    const auto fields = split_fields(line, line_no);
    if (fields.size() != 6) {
        throw ParseError("expected 6 fields, got " + std::to_string(fields.size()), line_no, 0);
    }
    Entry e;
    const std::string& seq = fields[0];
    auto [p, ec] = std::from_chars(seq.data(), seq.data() + seq.size(), e.seq);
    if (ec != std::errc{} || p != seq.data() + seq.size()) {
        throw ParseError("bad sequence number", line_no, 0);
    }
    try {
        e.time = parse_iso_time(fields[1]);
    } catch (const ParseError& err) {
        throw ParseError(err.detail(), line_no, 0);
    }
    const auto kind = parse_kind(fields[2]);
    if (!kind) throw ParseError("unknown entry kind '" + fields[2] + "'", line_no, 0);
    e.kind = *kind;
    e.subject = fields[3];
    e.outcome = fields[4];
    e.detail = fields[5];
    return e;
}

std::vector<Entry> parse_log(std::string_view text) {
    std::vector<Entry> out;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        ++line_no;
        const std::string_view line = text.substr(pos, eol - pos);
        if (!line.empty()) out.push_back(parse_entry(line, line_no));
        pos = eol + 1;
    }
    return out;
}

std::vector<Entry> load_log_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open audit log '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_log(buf.str());
}

AuditLog::AuditLog(Clock clock) : clock_(std::move(clock)) {}

AuditLog::AuditLog(const std::string& path, Mode mode, Clock clock)
    : clock_(std::move(clock)), path_(path) {
    if (mode == Mode::append) {
        std::ifstream existing(path, std::ios::binary);
        if (existing) {
            std::ostringstream buf;
            buf << existing.rdbuf();
            entries_ = parse_log(buf.str());
            if (!entries_.empty()) next_seq_ = entries_.back().seq + 1;
        }
    }
    const auto flags = std::ios::binary | (mode == Mode::append ? std::ios::app : std::ios::trunc);
    out_ = std::make_unique<std::ofstream>(path, flags);
    if (!*out_) throw IoError("cannot open audit log '" + path + "' for writing");
}

std::uint64_t AuditLog::record(Entry entry) {
    entry.seq = next_seq_;
    entry.time = clock_();
    if (out_) {
        *out_ << format_entry(entry) << '\n';
        out_->flush();
        if (!*out_) throw AppendError("failed to append to audit log '" + *path_ + "'");
    }
    entries_.push_back(std::move(entry));
    return next_seq_++;
}

}  // namespace aalguard::audit
