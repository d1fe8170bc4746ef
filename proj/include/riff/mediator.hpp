#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "riff/turn_model.hpp"

namespace riff {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

struct MediatorConfig {
    Millis window_ms = 300'000;
    Millis tick_ms = 1'000;
    int engagement_saturation_turns = 30;

    void validate() const;
};

inline constexpr std::size_t kMaxMediatorParticipants = 16;

/// Vertices of a regular n-gon on the unit circle, first participant at the
/// top (90 degrees), proceeding clockwise. Valid for 1 <= n <= 16.
std::vector<Point> layout_positions(std::size_t n);

struct MediatorSnapshot {
    std::string meeting_id;
    Millis t_ms = 0;
    std::vector<std::string> roster;  // join order; all per-participant vectors follow it
    std::vector<int> turn_counts;
    int engagement_total = 0;
    double engagement_level = 0.0;
    Point node;
    std::vector<double> spoke_weights;
    std::vector<Point> layout;

    friend bool operator==(const MediatorSnapshot&, const MediatorSnapshot&) = default;
};

/// Node placement from windowed turn counts. Starts from the count-weighted
/// centroid of the vertices; when a unique participant leads and the centroid
/// is nearer someone else, or close to a tie, the point is pulled along the
/// segment toward the leader's vertex to 90% of the way to the last point
/// where the leader is nearest. Result always lies
/// in the convex hull of the layout. All-zero counts give the origin (the
/// lone vertex when n = 1).
Point mediator_node(std::span<const Point> layout, std::span<const int> counts);

/// Live Meeting Mediator state for one meeting over a trailing window.
class Mediator {
public:
    Mediator(std::string meeting_id, MediatorConfig config = {});

    /// Appends a participant (join order). Rejoin is a no-op. Throws
    /// Error("roster_full") past kMaxMediatorParticipants.
    void add_participant(const std::string& participant_id);

    /// Adds turn onsets (timestamps <= now_ms), evicts onsets at or before
    /// now_ms - window_ms, and returns the snapshot at now_ms. Unknown
    /// participants are added to the roster. Throws Error("time_regression")
    /// if now_ms precedes the previous call.
    MediatorSnapshot advance(std::span<const TurnOnset> onsets, Millis now_ms);

    const std::vector<std::string>& roster() const { return roster_; }
    const MediatorConfig& config() const { return config_; }

private:
    std::string meeting_id_;
    MediatorConfig config_;
    std::vector<std::string> roster_;
    std::multiset<std::pair<Millis, std::size_t>> onsets_;  // (t_ms, roster index)
    Millis last_now_ = 0;
    bool started_ = false;
};

// Wire form, one JSON object per line:
// {"type":"mm","meeting":"m1","t_ms":61000,"counts":{"p1":3,"p2":1},"engagement":4,
//  "level":0.13,"node":[0.42,0.61],"spokes":{"p1":0.75,"p2":0.25}}
std::string snapshot_to_json(const MediatorSnapshot& snapshot);

}  // namespace riff
