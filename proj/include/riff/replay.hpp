#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "riff/hub.hpp"
#include "riff/turn_model.hpp"

namespace riff {

struct ReplayOptions {
    std::string meeting_id;          // empty: taken from the log
    std::int64_t started_at = 0;
    Millis tick_ms = 1000;
    std::optional<Millis> lead_ms;   // send events this far ahead of the meeting clock; unset: all at once
    std::chrono::milliseconds timeout{20000};
};

struct ReplayResult {
    std::string meeting_id;
    std::vector<std::string> roster;
    std::vector<std::string> snapshots;  // mm frames as received
    std::string metrics_doc;             // <meeting>.metrics.json bytes
};

/// Participants in order of first appearance.
std::vector<std::string> roster_of(const std::vector<VoiceActivityEvent>& events);

/// Streams a log to a running server: open, join everyone, send the vad
/// frames, wait for the clock to pass the last event, finalize.
ReplayResult replay_to_server(const std::string& host, std::uint16_t port, std::vector<VoiceActivityEvent> events,
                              const ReplayOptions& options);

/// Same session in-process, ticking on event timestamps.
ReplayResult replay_offline(std::vector<VoiceActivityEvent> events, const HubConfig& config,
                            const ReplayOptions& options);

}  // namespace riff
