#include "riff/hub.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "riff/error.hpp"

namespace riff {

using ordered_json = nlohmann::ordered_json;

Outbox::Outbox(std::function<void()> notify) : notify_(std::move(notify)) {}

void Outbox::set_notify(std::function<void()> notify) {
    std::lock_guard lock(mu_);
    notify_ = std::move(notify);
}

void Outbox::post_control(std::string frame) {
    std::function<void()> notify;
    {
        std::lock_guard lock(mu_);
        control_.push_back(std::move(frame));
        notify = notify_;
    }
    if (notify) notify();
}

void Outbox::post_snapshot(const std::string& meeting_id, std::shared_ptr<const std::string> frame) {
    std::function<void()> notify;
    {
        std::lock_guard lock(mu_);
        auto& slot = latest_[meeting_id];
        if (slot) {
            ++dropped_;
        } else {
            latest_order_.push_back(meeting_id);
        }
        slot = std::move(frame);
        notify = notify_;
    }
    if (notify) notify();
}

std::vector<std::string> Outbox::drain() {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& id : latest_order_) {
        auto& slot = latest_[id];
        if (slot) out.push_back(*slot);
        slot.reset();
    }
    latest_order_.clear();
    for (auto& f : control_) out.push_back(std::move(f));
    control_.clear();
    return out;
}

std::size_t Outbox::dropped_snapshots() const {
    std::lock_guard lock(mu_);
    return dropped_;
}

// ---------------------------------------------------------------------------

bool valid_meeting_id(std::string_view id) {
    if (id.empty() || id.size() > 64) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    });
}

struct MeetingHub::Session {
    Session(std::string meeting, const HubConfig& config)
        : id(std::move(meeting)),
          segmenter(config.policy.segmentation),
          mediator(id, config.mediator),
          opened(std::chrono::steady_clock::now()) {}

    std::mutex mu;
    std::string id;
    std::int64_t started_at = 0;
    std::vector<std::string> roster;
    std::vector<VoiceActivityEvent> log;
    std::vector<VoiceActivityEvent> held;  // not yet reached by the meeting clock
    IncrementalSegmenter segmenter;
    Mediator mediator;
    std::chrono::steady_clock::time_point opened;
    Millis last_tick = 0;
    std::optional<MediatorSnapshot> latest;
    std::shared_ptr<const std::string> latest_frame;
    bool finalized = false;
    std::string metrics_doc;
    std::vector<std::weak_ptr<Outbox>> subscribers;

    void add_subscriber(const std::shared_ptr<Outbox>& box) {
        for (const auto& w : subscribers)
            if (w.lock() == box) return;
        subscribers.push_back(box);
    }

    std::vector<std::shared_ptr<Outbox>> live_subscribers() {
        std::erase_if(subscribers, [](const std::weak_ptr<Outbox>& w) { return w.expired(); });
        std::vector<std::shared_ptr<Outbox>> out;
        for (const auto& w : subscribers)
            if (auto box = w.lock()) out.push_back(std::move(box));
        return out;
    }
};

MeetingHub::MeetingHub(HubConfig config) : config_(std::move(config)) {
    config_.mediator.validate();
    config_.policy.validate();
}

void MeetingHub::set_snapshot_listener(std::function<void(const MediatorSnapshot&)> listener) {
    listener_ = std::move(listener);
}

std::shared_ptr<MeetingHub::Session> MeetingHub::find(const std::string& meeting_id) const {
    std::shared_lock lock(mu_);
    auto it = sessions_.find(meeting_id);
    if (it == sessions_.end()) throw Error("unknown_meeting", "no meeting '" + meeting_id + "'");
    return it->second;
}

void MeetingHub::open(const std::string& meeting_id, std::optional<std::int64_t> started_at,
                      const std::shared_ptr<Outbox>& client) {
    if (!valid_meeting_id(meeting_id))
        throw Error("invalid_id", "meeting id must be 1-64 characters of [A-Za-z0-9_-]");
    auto session = std::make_shared<Session>(meeting_id, config_);
    session->started_at = started_at.value_or(std::chrono::duration_cast<std::chrono::milliseconds>(
                                                  std::chrono::system_clock::now().time_since_epoch())
                                                  .count());
    if (client) session->add_subscriber(client);
    std::unique_lock lock(mu_);
    if (!sessions_.emplace(meeting_id, session).second)
        throw Error("duplicate_meeting", "meeting '" + meeting_id + "' already exists");
}

std::vector<std::string> MeetingHub::join(const std::string& meeting_id, const std::string& participant_id,
                                          const std::shared_ptr<Outbox>& client) {
    auto s = find(meeting_id);
    std::shared_ptr<const std::string> current;
    std::vector<std::string> roster;
    {
        std::lock_guard lock(s->mu);
        if (s->finalized) throw Error("meeting_finalized", "meeting '" + meeting_id + "' is finalized");
        if (participant_id.empty()) throw Error("invalid_id", "participant id must be nonempty");
        if (std::find(s->roster.begin(), s->roster.end(), participant_id) == s->roster.end()) {
            s->mediator.add_participant(participant_id);
            s->roster.push_back(participant_id);
        }
        if (client) s->add_subscriber(client);
        current = s->latest_frame;
        roster = s->roster;
    }
    if (client && current) client->post_snapshot(meeting_id, current);
    return roster;
}

void MeetingHub::subscribe(const std::string& meeting_id, const std::shared_ptr<Outbox>& client) {
    auto s = find(meeting_id);
    std::shared_ptr<const std::string> current;
    {
        std::lock_guard lock(s->mu);
        s->add_subscriber(client);
        current = s->latest_frame;
    }
    if (current) client->post_snapshot(meeting_id, current);
}

std::uint64_t MeetingHub::ingest(std::string_view line) {
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error("malformed_json", "cannot parse frame");
    if (j.is_object()) {
        auto type = j.find("type");
        if (type != j.end()) {
            if (*type != "vad") throw Error("unknown_type", "expected a vad frame");
            j.erase("type");
        }
    }
    return ingest(parse_event_line(j.dump()));
}

std::uint64_t MeetingHub::ingest(const VoiceActivityEvent& event) {
    auto s = find(event.meeting_id);
    std::unique_lock lock(s->mu);
    if (s->finalized) throw Error("meeting_finalized", "meeting '" + event.meeting_id + "' is finalized");
    if (std::find(s->roster.begin(), s->roster.end(), event.participant_id) == s->roster.end())
        throw Error("unknown_participant", "'" + event.participant_id + "' has not joined '" + event.meeting_id + "'");
    if (event.t_ms < 0) throw Error("negative_timestamp", "t_ms " + std::to_string(event.t_ms) + " < 0");

    std::vector<MediatorSnapshot> snaps;
    if (event_clock_ && event.t_ms > 0) snaps = advance_locked(*s, event.t_ms - 1);
    s->log.push_back(event);
    s->held.push_back(event);
    const std::uint64_t seq = s->log.size();
    publish(*s, snaps, lock);
    return seq;
}

std::vector<MediatorSnapshot> MeetingHub::advance_locked(Session& s, Millis now_ms) {
    std::vector<MediatorSnapshot> out;
    if (s.finalized) return out;
    const Millis tick = config_.mediator.tick_ms;
    for (Millis k = s.last_tick + tick; k <= now_ms; k += tick) {
        std::stable_sort(s.held.begin(), s.held.end(),
                         [](const auto& a, const auto& b) { return a.t_ms < b.t_ms; });
        auto cut = std::find_if(s.held.begin(), s.held.end(), [&](const auto& e) { return e.t_ms > k; });
        for (auto it = s.held.begin(); it != cut; ++it) s.segmenter.push(*it);
        s.held.erase(s.held.begin(), cut);
        out.push_back(s.mediator.advance(s.segmenter.poll_turns(k), k));
        s.last_tick = k;
    }
    if (!out.empty()) {
        s.latest = out.back();
        s.latest_frame = std::make_shared<const std::string>(snapshot_to_json(out.back()));
    }
    return out;
}

void MeetingHub::publish(Session& s, const std::vector<MediatorSnapshot>& snaps,
                         std::unique_lock<std::mutex>& lock) {
    if (snaps.empty()) return;
    std::vector<std::shared_ptr<const std::string>> frames;
    frames.reserve(snaps.size());
    for (std::size_t i = 0; i + 1 < snaps.size(); ++i)
        frames.push_back(std::make_shared<const std::string>(snapshot_to_json(snaps[i])));
    frames.push_back(s.latest_frame);
    const auto subscribers = s.live_subscribers();
    const std::string id = s.id;
    lock.unlock();
    if (listener_)
        for (const auto& snap : snaps) listener_(snap);
    for (const auto& box : subscribers)
        for (const auto& f : frames) box->post_snapshot(id, f);
}

std::vector<MediatorSnapshot> MeetingHub::advance(const std::string& meeting_id, Millis now_ms) {
    auto s = find(meeting_id);
    std::unique_lock lock(s->mu);
    auto snaps = advance_locked(*s, now_ms);
    publish(*s, snaps, lock);
    return snaps;
}

void MeetingHub::advance_wall(double time_scale) {
    std::vector<std::shared_ptr<Session>> all;
    {
        std::shared_lock lock(mu_);
        for (const auto& [id, s] : sessions_) all.push_back(s);
    }
    const auto now = std::chrono::steady_clock::now();
    for (const auto& s : all) {
        std::unique_lock lock(s->mu);
        const double elapsed = std::chrono::duration<double, std::milli>(now - s->opened).count();
        auto snaps = advance_locked(*s, static_cast<Millis>(elapsed * time_scale));
        publish(*s, snaps, lock);
    }
}

std::string MeetingHub::finalize(const std::string& meeting_id) { return finalize(meeting_id, nullptr); }

std::string MeetingHub::finalize(const std::string& meeting_id, const std::shared_ptr<Outbox>& requester) {
    auto s = find(meeting_id);
    std::unique_lock lock(s->mu);
    if (s->finalized) return s->metrics_doc;

    Millis last = 0;
    for (const auto& e : s->log) last = std::max(last, e.t_ms);
    const Millis tick = config_.mediator.tick_ms;
    auto snaps = advance_locked(*s, (last + tick - 1) / tick * tick);

    AggregateOptions options;
    options.meeting_id = s->id;
    options.roster = s->roster;
    options.started_at = s->started_at;
    options.policy = config_.policy;
    const auto metrics = aggregate_meeting(s->log, options);
    s->metrics_doc = metrics_to_json(metrics);
    s->finalized = true;

    if (!config_.data_dir.empty()) {
        std::filesystem::create_directories(config_.data_dir);
        const auto base = std::filesystem::path(config_.data_dir) / s->id;
        write_event_log(base.string() + ".events.jsonl", s->log);
        std::ofstream out(base.string() + ".metrics.json", std::ios::binary | std::ios::trunc);
        if (!out) throw Error("io_error", "cannot write metrics for '" + s->id + "'");
        out << s->metrics_doc;
    }
    const std::string doc = s->metrics_doc;
    const auto subscribers = s->live_subscribers();
    publish(*s, snaps, lock);  // releases the lock

    ordered_json frame;
    frame["type"] = "metrics";
    frame["meeting"] = meeting_id;
    frame["metrics"] = ordered_json::parse(doc);
    const std::string line = frame.dump();
    for (const auto& box : subscribers)
        if (box != requester) box->post_control(line);
    return doc;
}

std::vector<VoiceActivityEvent> MeetingHub::event_log(const std::string& meeting_id) const {
    auto s = find(meeting_id);
    std::lock_guard lock(s->mu);
    return s->log;
}

std::vector<std::string> MeetingHub::roster(const std::string& meeting_id) const {
    auto s = find(meeting_id);
    std::lock_guard lock(s->mu);
    return s->roster;
}

MeetingStatus MeetingHub::status(const std::string& meeting_id) const {
    auto s = find(meeting_id);
    std::lock_guard lock(s->mu);
    return s->finalized ? MeetingStatus::Finalized : MeetingStatus::Open;
}

std::optional<MediatorSnapshot> MeetingHub::latest_snapshot(const std::string& meeting_id) const {
    auto s = find(meeting_id);
    std::lock_guard lock(s->mu);
    return s->latest;
}

std::int64_t MeetingHub::started_at(const std::string& meeting_id) const {
    auto s = find(meeting_id);
    std::lock_guard lock(s->mu);
    return s->started_at;
}

// ---------------------------------------------------------------------------

namespace {

std::string error_frame(const std::string& code, const std::string& message) {
    ordered_json j;
    j["type"] = "err";
    j["code"] = code;
    j["message"] = message;
    return j.dump();
}

std::string string_field(const nlohmann::json& j, const char* name) {
    auto it = j.find(name);
    if (it == j.end() || !it->is_string()) throw Error("malformed_frame", std::string("missing string field '") + name + "'");
    return it->get<std::string>();
}

}  // namespace

std::string MeetingHub::handle(std::string_view line, const std::shared_ptr<Outbox>& client) {
    std::string reply;
    try {
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw Error("malformed_json", "cannot parse frame");
        if (!j.is_object()) throw Error("malformed_frame", "frame must be a JSON object");
        const auto type_it = j.find("type");
        const std::string type = type_it == j.end() ? "vad" : (type_it->is_string() ? type_it->get<std::string>() : "");

        ordered_json ack;
        ack["type"] = "ack";
        ack["op"] = type;
        if (type == "open") {
            const auto id = string_field(j, "meeting");
            std::optional<std::int64_t> started;
            if (auto it = j.find("started_at"); it != j.end()) {
                if (!it->is_number_integer()) throw Error("malformed_frame", "started_at must be an integer");
                started = it->get<std::int64_t>();
            }
            open(id, started, client);
            ack["meeting"] = id;
            ack["started_at"] = started_at(id);
        } else if (type == "join") {
            const auto id = string_field(j, "meeting");
            const auto participant = string_field(j, "participant");
            const auto members = join(id, participant, client);
            ack["meeting"] = id;
            ack["participant"] = participant;
            ack["roster"] = members;
            ordered_json layout = ordered_json::array();
            for (const auto& p : layout_positions(members.size())) layout.push_back({p.x, p.y});
            ack["layout"] = layout;
        } else if (type == "vad") {
            const auto seq = ingest(line);
            ack["meeting"] = j.value("meeting", "");
            ack["seq"] = seq;
        } else if (type == "finalize") {
            const auto id = string_field(j, "meeting");
            const auto doc = finalize(id, client);
            ordered_json frame;
            frame["type"] = "metrics";
            frame["meeting"] = id;
            frame["metrics"] = ordered_json::parse(doc);
            reply = frame.dump();
        } else {
            throw Error("unknown_type", "unknown frame type '" + type + "'");
        }
        if (reply.empty()) reply = ack.dump();
    } catch (const Error& e) {
        reply = error_frame(e.code(), e.what());
    } catch (const std::exception& e) {
        reply = error_frame("internal", e.what());
    }
    if (client) client->post_control(reply);
    return reply;
}

}  // namespace riff
