#pragma once

#include <chrono>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "riff/mediator.hpp"
#include "riff/metrics.hpp"
#include "riff/turn_model.hpp"

namespace riff {

/// Per-connection delivery queue. Control frames (ack, err, metrics) are
/// kept in order; mm snapshots keep only the newest per meeting so a slow
/// reader never backs up the tick loop.
class Outbox {
public:
    explicit Outbox(std::function<void()> notify = {});

    void post_control(std::string frame);
    void post_snapshot(const std::string& meeting_id, std::shared_ptr<const std::string> frame);

    /// Pending snapshots first (one per meeting), then control frames.
    std::vector<std::string> drain();
    std::size_t dropped_snapshots() const;
    void set_notify(std::function<void()> notify);

private:
    mutable std::mutex mu_;
    std::function<void()> notify_;
    std::deque<std::string> control_;
    std::map<std::string, std::shared_ptr<const std::string>> latest_;
    std::vector<std::string> latest_order_;
    std::size_t dropped_ = 0;
};

struct HubConfig {
    MediatorConfig mediator;
    MetricsPolicy policy;
    std::string data_dir;  // empty: nothing persisted
};

enum class MeetingStatus { Open, Finalized };

/// Registry of live meetings. Each meeting is serialized by its own lock;
/// frames fan out to subscriber outboxes after the lock is released.
class MeetingHub {
public:
    explicit MeetingHub(HubConfig config);

    /// Handles one client frame and returns the reply frame (also posted to
    /// `client` when given). Never throws for bad input.
    std::string handle(std::string_view line, const std::shared_ptr<Outbox>& client = nullptr);

    void open(const std::string& meeting_id, std::optional<std::int64_t> started_at = std::nullopt,
              const std::shared_ptr<Outbox>& client = nullptr);
    /// Returns the roster after the join.
    std::vector<std::string> join(const std::string& meeting_id, const std::string& participant_id,
                                  const std::shared_ptr<Outbox>& client = nullptr);
    void subscribe(const std::string& meeting_id, const std::shared_ptr<Outbox>& client);
    /// Validates and appends one event line; returns its sequence number.
    std::uint64_t ingest(std::string_view line);
    std::uint64_t ingest(const VoiceActivityEvent& event);

    /// Emits one snapshot per tick boundary in (last tick, now_ms].
    std::vector<MediatorSnapshot> advance(const std::string& meeting_id, Millis now_ms);
    /// Advances every open meeting to (wall time since open) x time_scale.
    void advance_wall(double time_scale);

    /// Flushes ticks through the last event, aggregates the full log and
    /// persists it. Later calls return the stored document.
    std::string finalize(const std::string& meeting_id);

    std::vector<VoiceActivityEvent> event_log(const std::string& meeting_id) const;
    std::vector<std::string> roster(const std::string& meeting_id) const;
    MeetingStatus status(const std::string& meeting_id) const;
    std::optional<MediatorSnapshot> latest_snapshot(const std::string& meeting_id) const;
    std::int64_t started_at(const std::string& meeting_id) const;

    /// Replay mode: each ingested event first emits the ticks strictly before it.
    void set_event_clock(bool on) { event_clock_ = on; }
    /// Observer for every emitted snapshot (tests, replay output).
    void set_snapshot_listener(std::function<void(const MediatorSnapshot&)> listener);

    const HubConfig& config() const { return config_; }

private:
    struct Session;

    std::string finalize(const std::string& meeting_id, const std::shared_ptr<Outbox>& requester);
    std::shared_ptr<Session> find(const std::string& meeting_id) const;
    std::vector<MediatorSnapshot> advance_locked(Session& s, Millis now_ms);
    void publish(Session& s, const std::vector<MediatorSnapshot>& snaps,
                 std::unique_lock<std::mutex>& lock);

    HubConfig config_;
    bool event_clock_ = false;
    std::function<void(const MediatorSnapshot&)> listener_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
};

bool valid_meeting_id(std::string_view id);

}  // namespace riff
