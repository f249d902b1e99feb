#include "aalguard/behavior.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "aalguard/error.hpp"

namespace aalguard::behavior {
namespace {

std::vector<const SensorEvent*> stream_of(const std::vector<SensorEvent>& events,
                                          std::string_view user) {
    std::vector<const SensorEvent*> out;
    for (const SensorEvent& e : events) {
        if (e.user != user) continue;
        if (!out.empty() && e.timestamp < out.back()->timestamp) {
            throw OrderingError("events of user '" + std::string(user) + "' go back in time at t=" +
                                std::to_string(e.timestamp));
        }
        out.push_back(&e);
    }
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

std::string shortest(double v) {
    std::array<char, 64> buf{};
    auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    (void)ec;
    return std::string(buf.data(), p);
}

std::string read_file(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(std::string("cannot open ") + what + " '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos <= text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        ++line_no;
        fn(text.substr(pos, eol - pos), line_no, pos);
        if (eol == text.size()) break;
        pos = eol + 1;
    }
}

}  // namespace

std::map<RoomPair, std::vector<std::int64_t>> moving_time(const std::vector<SensorEvent>& events,
                                                          std::string_view user) {
    std::map<RoomPair, std::vector<std::int64_t>> out;
    const auto stream = stream_of(events, user);
    for (std::size_t i = 1; i < stream.size(); ++i) {
        const SensorEvent& a = *stream[i - 1];
        const SensorEvent& b = *stream[i];
        if (a.location == b.location) continue;
        out[{a.location, b.location}].push_back(b.timestamp - a.timestamp);
    }
    return out;
}

std::map<std::string, std::vector<std::int64_t>> holding_time(
    const std::vector<SensorEvent>& events, std::string_view user) {
    std::map<std::string, std::vector<std::int64_t>> out;
    const auto stream = stream_of(events, user);
    const SensorEvent* run_first = nullptr;
    const SensorEvent* run_last = nullptr;
    auto close = [&] {
        if (run_first) out[run_first->activity].push_back(run_last->timestamp - run_first->timestamp);
        run_first = run_last = nullptr;
    };
    for (const SensorEvent* e : stream) {
        if (run_first && e->activity == run_first->activity) {
            run_last = e;
            continue;
        }
        close();
        if (e->activity != kIdleActivity) run_first = run_last = e;
    }
    close();
    return out;
}

std::string move_key(std::string_view from, std::string_view to) {
    return "move:" + std::string(from) + "->" + std::string(to);
}

std::string hold_key(std::string_view activity) { return "hold:" + std::string(activity); }

FeatureVector extract_features(const std::vector<SensorEvent>& events, std::string_view user) {
    FeatureVector fv;
    auto fold = [&fv](const std::string& key, const std::vector<std::int64_t>& durations) {
        std::int64_t sum = 0;
        for (auto d : durations) sum += d;
        fv.entries[key] = static_cast<double>(sum) / static_cast<double>(durations.size());
        fv.support[key] = durations.size();
    };
    for (const auto& [rooms, durations] : moving_time(events, user)) {
        fold(move_key(rooms.first, rooms.second), durations);
    }
    for (const auto& [activity, durations] : holding_time(events, user)) {
        fold(hold_key(activity), durations);
    }
    return fv;
}

double distance(const FeatureVector& a, const FeatureVector& b) {
    double sum = 0.0;
    auto ia = a.entries.begin();
    auto ib = b.entries.begin();
    while (ia != a.entries.end() || ib != b.entries.end()) {
        double d = 0.0;
        if (ib == b.entries.end() || (ia != a.entries.end() && ia->first < ib->first)) {
            d = ia->second;
            ++ia;
        } else if (ia == a.entries.end() || ib->first < ia->first) {
            d = ib->second;
            ++ib;
        } else {
            d = ia->second - ib->second;
            ++ia;
            ++ib;
        }
        sum += d * d;
    }
    return std::sqrt(sum);
}

BehaviorModel::BehaviorModel(std::vector<BehaviorClass> classes, double distance_floor) {
    set_distance_floor(distance_floor);
    for (auto& c : classes) add_class(std::move(c));
}

void BehaviorModel::set_distance_floor(double floor) {
    if (!(floor > 0.0) || !std::isfinite(floor)) {
        throw ValidationError("distance floor must be a positive number");
    }
    distance_floor_ = floor;
}

void BehaviorModel::add_class(BehaviorClass cls) {
    for (const auto& c : classes_) {
        if (c.id == cls.id) throw ValidationError("duplicate behavior class '" + cls.id + "'");
    }
    for (const auto& [key, value] : cls.centroid.entries) {
        if (!(value >= 0.0)) {
            throw ValidationError("class '" + cls.id + "' has a negative duration for " + key);
        }
    }
    classes_.push_back(std::move(cls));
}

const BehaviorClass& BehaviorModel::get(std::string_view id) const {
    for (const auto& c : classes_) {
        if (c.id == id) return c;
    }
    throw NotFoundError("unknown behavior class '" + std::string(id) + "'");
}

BehaviorClass& BehaviorModel::get_mutable(std::string_view id) {
    return const_cast<BehaviorClass&>(std::as_const(*this).get(id));
}

Classification BehaviorModel::classify(const FeatureVector& fv) const {
    if (classes_.empty()) throw ValidationError("behavior model has no classes");
    Classification best{classes_.front().id, distance(fv, classes_.front().centroid)};
    for (std::size_t i = 1; i < classes_.size(); ++i) {
        const double d = distance(fv, classes_[i].centroid);
        if (d < best.distance) best = {classes_[i].id, d};
    }
    return best;
}

void BehaviorModel::update_class(std::string_view id, const FeatureVector& fv) {
    BehaviorClass& cls = get_mutable(id);
    const double weight = static_cast<double>(cls.n + 1);
    for (const auto& [key, x] : fv.entries) {
        auto [it, inserted] = cls.centroid.entries.try_emplace(key, x);
        if (!inserted) it->second += (x - it->second) / weight;
        ++cls.centroid.support[key];
    }
    ++cls.n;
}

double BehaviorModel::trust_score(std::string_view id, const FeatureVector& fv) const {
    const double d = distance(fv, get(id).centroid);
    return 1.0 / (1.0 + d / distance_floor_);
}

std::vector<SensorEvent> parse_events(std::string_view csv) {
    std::vector<SensorEvent> out;
    bool header_seen = false;
    for_each_line(csv, [&](std::string_view raw, std::size_t line_no, std::size_t offset) {
        const std::string line = trim(raw);
        if (line.empty() || line.front() == '#') return;
        if (!header_seen) {
            if (line != "timestamp,user,location,activity") {
                throw ParseError("expected header 'timestamp,user,location,activity'", line_no,
                                 offset);
            }
            header_seen = true;
            return;
        }
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            fields.push_back(trim(std::string_view(line).substr(start, comma - start)));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 4) {
            throw ParseError("expected 4 fields, got " + std::to_string(fields.size()), line_no,
                             offset);
        }
        SensorEvent e;
        const std::string& ts = fields[0];
        auto [p, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), e.timestamp);
        if (ec != std::errc{} || p != ts.data() + ts.size()) {
            throw ParseError("timestamp '" + ts + "' is not an integer", line_no, offset);
        }
        for (std::size_t f = 1; f < 4; ++f) {
            if (fields[f].empty()) throw ParseError("empty field", line_no, offset);
        }
        e.user = fields[1];
        e.location = fields[2];
        e.activity = fields[3];
        out.push_back(std::move(e));
    });
    if (!header_seen) throw ParseError("missing CSV header", 1, 0);
    return out;
}

std::vector<SensorEvent> load_events_file(const std::string& path) {
    const std::string text = read_file(path, "event file");
    try {
        return parse_events(text);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.detail(), e.line(), e.offset());
    }
}

std::vector<std::string> users_of(const std::vector<SensorEvent>& events) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& e : events) {
        if (seen.insert(e.user).second) out.push_back(e.user);
    }
    return out;
}

std::string save_model(const BehaviorModel& model) {
    std::string out;
    for (const BehaviorClass& c : model.classes()) {
        out += "class " + c.id + " n=" + std::to_string(c.n) + "\n";
        for (const auto& [key, value] : c.centroid.entries) {
            out += "  " + key + " = " + shortest(value) + "\n";
        }
    }
    return out;
}

BehaviorModel load_model(std::string_view text, double distance_floor) {
    BehaviorModel model({}, distance_floor);
    std::optional<BehaviorClass> current;
    auto flush = [&] {
        if (current) model.add_class(std::move(*current));
        current.reset();
    };
    for_each_line(text, [&](std::string_view raw, std::size_t line_no, std::size_t offset) {
        const std::string line = trim(raw);
        if (line.empty() || line.front() == '#') return;
        if (line.rfind("class ", 0) == 0) {
            flush();
            std::istringstream in(line.substr(6));
            std::string id;
            std::string count;
            if (!(in >> id >> count) || count.rfind("n=", 0) != 0) {
                throw ParseError("expected 'class <id> n=<n>'", line_no, offset);
            }
            BehaviorClass cls;
            cls.id = id;
            const std::string digits = count.substr(2);
            auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), cls.n);
            if (ec != std::errc{} || p != digits.data() + digits.size()) {
                throw ParseError("bad observation count '" + count + "'", line_no, offset);
            }
            current = std::move(cls);
            return;
        }
        if (!current) throw ParseError("feature line outside a class block", line_no, offset);
        const std::size_t eq = line.find(" = ");
        if (eq == std::string::npos) throw ParseError("expected '<key> = <value>'", line_no, offset);
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 3));
        double v = 0.0;
        auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (ec != std::errc{} || p != value.data() + value.size() || !std::isfinite(v)) {
            throw ParseError("bad feature value '" + value + "'", line_no, offset);
        }
        current->centroid.entries[key] = v;
        current->centroid.support[key] = current->n;
    });
    flush();
    return model;
}

BehaviorModel load_model_file(const std::string& path, double distance_floor) {
    const std::string text = read_file(path, "model checkpoint");
    try {
        return load_model(text, distance_floor);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.detail(), e.line(), e.offset());
    }
}

void save_model_file(const BehaviorModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write model checkpoint '" + path + "'");
    out << save_model(model);
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace aalguard::behavior
