#include "riff/replay.hpp"

#include <algorithm>

#include <json.hpp>

#include "riff/error.hpp"
#include "riff/server.hpp"

namespace riff {

using ordered_json = nlohmann::ordered_json;

std::vector<std::string> roster_of(const std::vector<VoiceActivityEvent>& events) {
    std::vector<std::string> out;
    for (const auto& e : events)
        if (std::find(out.begin(), out.end(), e.participant_id) == out.end()) out.push_back(e.participant_id);
    return out;
}

namespace {

std::string resolve_meeting(std::vector<VoiceActivityEvent>& events, const ReplayOptions& options) {
    std::string id = options.meeting_id;
    if (id.empty()) {
        if (events.empty()) throw ValidationError("empty_log", "cannot infer a meeting id from an empty log");
        id = events.front().meeting_id;
    }
    for (auto& e : events) e.meeting_id = id;
    return id;
}

Millis flush_target(const std::vector<VoiceActivityEvent>& events, Millis tick) {
    Millis last = 0;
    for (const auto& e : events) last = std::max(last, e.t_ms);
    return (last + tick - 1) / tick * tick;
}

std::string metrics_doc_from_frame(const ordered_json& frame) {
    return frame.at("metrics").dump(2) + "\n";
}

}  // namespace

ReplayResult replay_to_server(const std::string& host, std::uint16_t port, std::vector<VoiceActivityEvent> events,
                              const ReplayOptions& options) {
    ReplayResult result;
    result.meeting_id = resolve_meeting(events, options);
    result.roster = roster_of(events);
    LineClient client(host, port);
    Millis clock = 0;
    std::size_t acked = 0;

    // Reads one frame; mm frames are recorded and advance the known clock.
    auto next = [&]() -> ordered_json {
        auto line = client.read_line(options.timeout);
        if (!line) throw Error("timeout", "no reply from server");
        auto j = ordered_json::parse(*line);
        if (j.value("type", "") == "mm" && j.value("meeting", "") == result.meeting_id) {
            result.snapshots.push_back(*line);
            clock = std::max<Millis>(clock, j.at("t_ms").get<Millis>());
        }
        if (j.value("type", "") == "ack" && j.value("op", "") == "vad") ++acked;
        return j;
    };
    auto expect_reply = [&](const std::string& type) {
        for (;;) {
            auto j = next();
            const auto t = j.value("type", "");
            if (t == "err") throw Error(j.value("code", "err"), j.value("message", ""));
            if (t == type) return j;
        }
    };

    ordered_json open{{"type", "open"}, {"meeting", result.meeting_id}, {"started_at", options.started_at}};
    client.send(open.dump());
    expect_reply("ack");
    for (const auto& p : result.roster) {
        client.send(ordered_json{{"type", "join"}, {"meeting", result.meeting_id}, {"participant", p}}.dump());
        expect_reply("ack");
    }

    std::size_t sent = 0;
    while (sent < events.size()) {
        if (options.lead_ms && events[sent].t_ms > clock + *options.lead_ms) {
            next();
            continue;
        }
        client.send(to_jsonl(events[sent++]));
    }
    while (acked < sent) {
        auto j = next();
        if (j.value("type", "") == "err") throw Error(j.value("code", "err"), j.value("message", ""));
    }
    const Millis target = flush_target(events, options.tick_ms);
    while (clock < target) next();

    client.send(ordered_json{{"type", "finalize"}, {"meeting", result.meeting_id}}.dump());
    result.metrics_doc = metrics_doc_from_frame(expect_reply("metrics"));
    return result;
}

ReplayResult replay_offline(std::vector<VoiceActivityEvent> events, const HubConfig& config,
                            const ReplayOptions& options) {
    ReplayResult result;
    result.meeting_id = resolve_meeting(events, options);
    result.roster = roster_of(events);
    MeetingHub hub(config);
    hub.set_event_clock(true);
    hub.set_snapshot_listener([&](const MediatorSnapshot& s) { result.snapshots.push_back(snapshot_to_json(s)); });
    hub.open(result.meeting_id, options.started_at);
    for (const auto& p : result.roster) hub.join(result.meeting_id, p);
    for (const auto& e : events) hub.ingest(e);
    result.metrics_doc = hub.finalize(result.meeting_id);
    return result;
}

}  // namespace riff
