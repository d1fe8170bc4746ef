#include "riff/mediator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "riff/error.hpp"

namespace riff {

void MediatorConfig::validate() const {
    if (tick_ms <= 0) throw ValidationError("invalid_config", "tick_ms must be > 0");
    if (window_ms < tick_ms) throw ValidationError("invalid_config", "window_ms must be >= tick_ms");
    if (engagement_saturation_turns <= 0)
        throw ValidationError("invalid_config", "engagement_saturation_turns must be > 0");
}

std::vector<Point> layout_positions(std::size_t n) {
    if (n == 0 || n > kMaxMediatorParticipants)
        throw Error("invalid_roster_size", "layout supports 1.." + std::to_string(kMaxMediatorParticipants) +
                                               " participants, got " + std::to_string(n));
    auto snap = [](double v) { return std::abs(v) < 1e-12 ? 0.0 : v; };
    std::vector<Point> pts;
    pts.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double angle = std::numbers::pi / 2 - 2 * std::numbers::pi * static_cast<double>(k) /
                                                        static_cast<double>(n);
        pts.push_back({snap(std::cos(angle)), snap(std::sin(angle))});
    }
    return pts;
}

Point mediator_node(std::span<const Point> layout, std::span<const int> counts) {
    double total = 0;
    Point c;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        total += counts[i];
        c.x += layout[i].x * counts[i];
        c.y += layout[i].y * counts[i];
    }
    // empty window: origin, except a lone participant whose hull is one point
    if (total <= 0) return layout.size() == 1 ? layout[0] : Point{};
    c.x /= total;
    c.y /= total;

    const auto top = std::max_element(counts.begin(), counts.end());
    if (std::count(counts.begin(), counts.end(), *top) != 1) return c;
    const auto m = static_cast<std::size_t>(top - counts.begin());
    const Point vm = layout[m];

    // Along p(l) = vm + l (c - vm), vm stays strictly nearest while
    // p(l) . (vk - vm) < 0 for every other vertex k.
    double limit = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < layout.size(); ++k) {
        if (k == m) continue;
        const double dx = layout[k].x - vm.x;
        const double dy = layout[k].y - vm.y;
        const double a = vm.x * dx + vm.y * dy;
        const double b = (c.x - vm.x) * dx + (c.y - vm.y) * dy;
        if (b > 0) limit = std::min(limit, -a / b);
    }
    // keep a tenth of the way back from the boundary; continuous in the
    // counts since 0.9 * limit meets 1 exactly where the pull starts
    const double l = std::min(1.0, 0.9 * limit);
    if (l >= 1.0) return c;
    return {vm.x + l * (c.x - vm.x), vm.y + l * (c.y - vm.y)};
}

Mediator::Mediator(std::string meeting_id, MediatorConfig config)
    : meeting_id_(std::move(meeting_id)), config_(config) {
    config_.validate();
}

void Mediator::add_participant(const std::string& participant_id) {
    if (std::find(roster_.begin(), roster_.end(), participant_id) != roster_.end()) return;
    if (roster_.size() >= kMaxMediatorParticipants)
        throw Error("roster_full", "meeting '" + meeting_id_ + "' already has " +
                                       std::to_string(kMaxMediatorParticipants) + " participants");
    roster_.push_back(participant_id);
}

MediatorSnapshot Mediator::advance(std::span<const TurnOnset> onsets, Millis now_ms) {
    if (started_ && now_ms < last_now_)
        throw Error("time_regression", "now_ms " + std::to_string(now_ms) + " precedes previous " +
                                           std::to_string(last_now_));
    started_ = true;
    last_now_ = now_ms;
    const Millis horizon = now_ms - config_.window_ms;

    for (const auto& o : onsets) {
        if (o.t_ms > now_ms)
            throw Error("future_onset", "onset at " + std::to_string(o.t_ms) + " after now " +
                                            std::to_string(now_ms));
        add_participant(o.participant_id);
        if (o.t_ms <= horizon) continue;
        const auto idx = static_cast<std::size_t>(
            std::find(roster_.begin(), roster_.end(), o.participant_id) - roster_.begin());
        onsets_.emplace(o.t_ms, idx);
    }
    while (!onsets_.empty() && onsets_.begin()->first <= horizon) onsets_.erase(onsets_.begin());

    MediatorSnapshot s;
    s.meeting_id = meeting_id_;
    s.t_ms = now_ms;
    s.roster = roster_;
    s.turn_counts.assign(roster_.size(), 0);
    for (const auto& [t, idx] : onsets_) ++s.turn_counts[idx];
    for (int c : s.turn_counts) s.engagement_total += c;
    s.engagement_level = std::min(1.0, static_cast<double>(s.engagement_total) /
                                           static_cast<double>(config_.engagement_saturation_turns));
    s.spoke_weights.assign(roster_.size(), 0.0);
    if (s.engagement_total > 0) {
        for (std::size_t i = 0; i < roster_.size(); ++i)
            s.spoke_weights[i] = static_cast<double>(s.turn_counts[i]) / s.engagement_total;
    }
    if (!roster_.empty()) {
        s.layout = layout_positions(roster_.size());
        s.node = mediator_node(s.layout, s.turn_counts);
    }
    return s;
}

std::string snapshot_to_json(const MediatorSnapshot& s) {
    nlohmann::ordered_json j;
    j["type"] = "mm";
    j["meeting"] = s.meeting_id;
    j["t_ms"] = s.t_ms;
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    nlohmann::ordered_json spokes = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < s.roster.size(); ++i) {
        counts[s.roster[i]] = s.turn_counts[i];
        spokes[s.roster[i]] = s.spoke_weights[i];
    }
    j["counts"] = std::move(counts);
    j["engagement"] = s.engagement_total;
    j["level"] = s.engagement_level;
    j["node"] = {s.node.x, s.node.y};
    j["spokes"] = std::move(spokes);
    return j.dump();
}

}  // namespace riff
