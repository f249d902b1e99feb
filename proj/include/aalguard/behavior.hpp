#pragma once

// Behavior tracking from sensor events: Moving_Time (room-to-room transit
// durations) and Holding_Time (activity run durations), a nearest-centroid
// behavior classifier with online centroid updates, and a trust score.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace aalguard::behavior {

inline constexpr std::string_view kIdleActivity = "none";
inline constexpr double kDefaultDistanceFloor = 30.0;

struct SensorEvent {
    std::string user;
    std::int64_t timestamp = 0;  // seconds since epoch
    std::string location;
    std::string activity;  // "none" when idle
};

using RoomPair = std::pair<std::string, std::string>;

// Throws OrderingError if the user's timestamps decrease.
std::map<RoomPair, std::vector<std::int64_t>> moving_time(const std::vector<SensorEvent>& events,
                                                          std::string_view user);
std::map<std::string, std::vector<std::int64_t>> holding_time(
    const std::vector<SensorEvent>& events, std::string_view user);

std::string move_key(std::string_view from, std::string_view to);  // move:<from>-><to>
std::string hold_key(std::string_view activity);                   // hold:<activity>

struct FeatureVector {
    std::map<std::string, double> entries;        // key -> mean duration (s)
    std::map<std::string, std::size_t> support;   // key -> observation count

    bool empty() const noexcept { return entries.empty(); }
};

FeatureVector extract_features(const std::vector<SensorEvent>& events, std::string_view user);

// Euclidean over the union of keys; a key missing on one side counts as 0.
double distance(const FeatureVector& a, const FeatureVector& b);

struct BehaviorClass {
    std::string id;
    FeatureVector centroid;
    std::size_t n = 0;  // observations folded in
};

struct Classification {
    std::string class_id;
    double distance = 0.0;
};

class BehaviorModel {
public:
    BehaviorModel() = default;
    explicit BehaviorModel(std::vector<BehaviorClass> classes,
                           double distance_floor = kDefaultDistanceFloor);

    const std::vector<BehaviorClass>& classes() const noexcept { return classes_; }
    double distance_floor() const noexcept { return distance_floor_; }
    void set_distance_floor(double floor);

    // Throws ValidationError on a duplicate id.
    void add_class(BehaviorClass cls);
    // Throws NotFoundError.
    const BehaviorClass& get(std::string_view id) const;

    // Nearest centroid, ties to the earlier class. Throws ValidationError when
    // the model has no classes.
    Classification classify(const FeatureVector& fv) const;

    // Incremental mean c <- c + (x - c) / (n + 1) on the keys of `fv`; keys new
    // to the centroid adopt x. Other classes are untouched.
    void update_class(std::string_view id, const FeatureVector& fv);

    // 1 / (1 + d / floor), in (0, 1], equal to 1 only at distance 0.
    double trust_score(std::string_view id, const FeatureVector& fv) const;

private:
    BehaviorClass& get_mutable(std::string_view id);

    std::vector<BehaviorClass> classes_;
    double distance_floor_ = kDefaultDistanceFloor;
};

// Event File Format: CSV with header `timestamp,user,location,activity`.
std::vector<SensorEvent> parse_events(std::string_view csv);
std::vector<SensorEvent> load_events_file(const std::string& path);

// Users in first-appearance order.
std::vector<std::string> users_of(const std::vector<SensorEvent>& events);

// Model checkpoint: `class <id> n=<n>` lines, each followed by indented
// `<feature-key> = <value>` lines.
std::string save_model(const BehaviorModel& model);
BehaviorModel load_model(std::string_view text, double distance_floor = kDefaultDistanceFloor);
BehaviorModel load_model_file(const std::string& path, double distance_floor = kDefaultDistanceFloor);
void save_model_file(const BehaviorModel& model, const std::string& path);

}  // namespace aalguard::behavior
