#include "riff/turn_model.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <tuple>

#include <json.hpp>

#include "riff/error.hpp"

namespace riff {

using ordered_json = nlohmann::ordered_json;

void SegmentationPolicy::validate() const {
    if (g_merge_ms < 0) throw ValidationError("invalid_policy", "g_merge_ms must be >= 0");
    if (t_turn_ms <= 0) throw ValidationError("invalid_policy", "t_turn_ms must be > 0");
    if (t_turn_ms < g_merge_ms) throw ValidationError("invalid_policy", "t_turn_ms must be >= g_merge_ms");
}

std::string to_jsonl(const VoiceActivityEvent& event) {
    ordered_json j;
    j["meeting"] = event.meeting_id;
    j["participant"] = event.participant_id;
    j["t_ms"] = event.t_ms;
    j["speaking"] = event.speaking;
    return j.dump();
}

namespace {

VoiceActivityEvent event_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error("malformed_frame", "event must be a JSON object");
    auto field = [&](const char* name) -> const nlohmann::json& {
        auto it = j.find(name);
        if (it == j.end()) throw Error("malformed_frame", std::string("missing field '") + name + "'");
        return *it;
    };
    const auto& meeting = field("meeting");
    const auto& participant = field("participant");
    const auto& t = field("t_ms");
    const auto& speaking = field("speaking");
    if (!meeting.is_string() || !participant.is_string())
        throw Error("malformed_frame", "meeting and participant must be strings");
    if (!t.is_number_integer()) throw Error("malformed_frame", "t_ms must be an integer");
    if (!speaking.is_boolean()) throw Error("malformed_frame", "speaking must be a boolean");
    VoiceActivityEvent e;
    e.meeting_id = meeting.get<std::string>();
    e.participant_id = participant.get<std::string>();
    e.t_ms = t.get<Millis>();
    e.speaking = speaking.get<bool>();
    return e;
}

}  // namespace

VoiceActivityEvent parse_event_line(std::string_view line) {
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error("malformed_json", "cannot parse event line");
    return event_from_json(j);
}

std::vector<VoiceActivityEvent> read_event_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("io_error", "cannot open " + path);
    std::vector<VoiceActivityEvent> events;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        try {
            events.push_back(parse_event_line(line));
        } catch (const Error& e) {
            throw ValidationError(e.code(), path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return events;
}

void write_event_log(const std::string& path, std::span<const VoiceActivityEvent> events) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("io_error", "cannot write " + path);
    for (const auto& e : events) out << to_jsonl(e) << '\n';
}

bool utterance_before(const Utterance& a, const Utterance& b) {
    if (a.start_ms != b.start_ms) return a.start_ms < b.start_ms;
    if (a.end_ms != b.end_ms) return a.end_ms > b.end_ms;
    return a.participant_id < b.participant_id;
}

std::vector<VoiceActivityEvent> normalize_events(std::span<const VoiceActivityEvent> events,
                                                 std::optional<Millis> close_dangling_at) {
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].t_ms < 0)
            throw Error("negative_timestamp", "event #" + std::to_string(i) + " has t_ms " +
                                                  std::to_string(events[i].t_ms));
    }
    auto key = [&](std::size_t i) {
        const auto& e = events[i];
        return std::tie(e.t_ms, e.meeting_id, e.participant_id);
    };
    std::vector<std::size_t> order(events.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return key(a) < key(b); });

    std::map<std::pair<std::string, std::string>, bool> speaking;
    std::vector<VoiceActivityEvent> out;
    out.reserve(events.size());
    Millis last_t = 0;

    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        bool onset = false;
        bool offset = false;
        while (j < order.size() && key(order[j]) == key(order[i])) {
            (events[order[j]].speaking ? onset : offset) = true;
            ++j;
        }
        const auto& first = events[order[i]];
        last_t = std::max(last_t, first.t_ms);
        bool& on = speaking[{first.meeting_id, first.participant_id}];
        auto emit = [&](bool s) {
            out.push_back({first.meeting_id, first.participant_id, first.t_ms, s});
            on = s;
        };
        // Resolve a same-instant group against the current state so the
        // result does not depend on arrival order within the group.
        if (on) {
            if (offset) {
                emit(false);
                if (onset) emit(true);
            }
        } else if (onset) {
            emit(true);
            if (offset) emit(false);
        }
        i = j;
    }

    const Millis close_at = close_dangling_at.value_or(last_t);
    if (close_at < last_t)
        throw Error("invalid_argument", "close_dangling_at precedes the last event");
    for (const auto& [who, on] : speaking) {
        if (on) out.push_back({who.first, who.second, close_at, false});
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.t_ms, a.meeting_id, a.participant_id) <
               std::tie(b.t_ms, b.meeting_id, b.participant_id);
    });
    return out;
}

std::vector<Utterance> segment_utterances(std::span<const VoiceActivityEvent> events,
                                          const SegmentationPolicy& policy) {
    policy.validate();
    std::map<std::string, std::optional<Millis>> open;
    std::map<std::string, std::vector<Utterance>> per;
    for (const auto& e : events) {
        auto& o = open[e.participant_id];
        if (e.speaking) {
            if (!o) o = e.t_ms;
            continue;
        }
        if (!o) continue;
        const Millis start = *o;
        o.reset();
        if (e.t_ms <= start) continue;
        auto& list = per[e.participant_id];
        if (!list.empty() && start - list.back().end_ms < policy.g_merge_ms) {
            list.back().end_ms = std::max(list.back().end_ms, e.t_ms);
        } else {
            list.push_back({e.participant_id, start, e.t_ms});
        }
    }
    std::vector<Utterance> out;
    for (auto& [_, list] : per) out.insert(out.end(), list.begin(), list.end());
    std::sort(out.begin(), out.end(), utterance_before);
    return out;
}

TurnSplit classify_turns(std::span<const Utterance> utterances, const SegmentationPolicy& policy) {
    policy.validate();
    std::vector<Utterance> sorted(utterances.begin(), utterances.end());
    std::sort(sorted.begin(), sorted.end(), utterance_before);
    TurnSplit split;
    for (auto& u : sorted) {
        if (u.duration() >= policy.t_turn_ms) {
            split.turns.push_back({std::move(u), split.turns.size()});
        } else {
            split.backchannels.push_back(std::move(u));
        }
    }
    return split;
}

// ---------------------------------------------------------------------------

IncrementalSegmenter::IncrementalSegmenter(SegmentationPolicy policy) : policy_(policy) {
    policy_.validate();
}

void IncrementalSegmenter::close_interval(Participant& p, const std::string& id, Millis start,
                                          Millis end) const {
    if (end <= start) return;
    if (!p.utterances.empty() && start - p.utterances.back().end_ms < policy_.g_merge_ms) {
        p.utterances.back().end_ms = std::max(p.utterances.back().end_ms, end);
    } else {
        p.utterances.push_back({id, start, end});
    }
}

void IncrementalSegmenter::apply(Participant& p, const std::string& id, const Group& g) const {
    if (p.speaking) {
        if (g.offset) {
            close_interval(p, id, p.open_since, g.t);
            p.speaking = false;
            if (g.onset) {
                p.speaking = true;
                p.open_since = g.t;
            }
        }
    } else if (g.onset) {
        // onset+offset at the same instant is a zero-length interval: no-op
        if (!g.offset) {
            p.speaking = true;
            p.open_since = g.t;
        }
    }
}

void IncrementalSegmenter::rebuild(Participant& p, const std::string& id) const {
    std::stable_sort(p.history.begin(), p.history.end(),
                     [](const auto& a, const auto& b) { return a.t_ms < b.t_ms; });
    p.speaking = false;
    p.open_since = 0;
    p.utterances.clear();
    p.unchecked = 0;
    p.pending.reset();
    for (const auto& e : p.history) {
        if (p.pending && p.pending->t != e.t_ms) {
            apply(p, id, *p.pending);
            p.pending.reset();
        }
        if (!p.pending) p.pending = Group{e.t_ms, false, false};
        (e.speaking ? p.pending->onset : p.pending->offset) = true;
    }
}

void IncrementalSegmenter::push(const VoiceActivityEvent& event) {
    if (event.t_ms < 0)
        throw Error("negative_timestamp", "t_ms " + std::to_string(event.t_ms));
    last_t_ = std::max(last_t_, event.t_ms);
    auto& p = participants_[event.participant_id];
    p.history.push_back(event);
    if (p.pending && event.t_ms < p.pending->t) {
        rebuild(p, event.participant_id);
        return;
    }
    if (p.pending && event.t_ms > p.pending->t) {
        apply(p, event.participant_id, *p.pending);
        p.pending.reset();
    }
    if (!p.pending) p.pending = Group{event.t_ms, false, false};
    (event.speaking ? p.pending->onset : p.pending->offset) = true;
}

std::vector<TurnOnset> IncrementalSegmenter::poll_turns(Millis now_ms) {
    std::vector<TurnOnset> found;
    for (auto& [id, p] : participants_) {
        // Evaluate on a resolved copy of the tail so the pending group stays open.
        Participant view;
        const Participant* cur = &p;
        if (p.pending && p.pending->t <= now_ms) {
            view.speaking = p.speaking;
            view.open_since = p.open_since;
            if (!p.utterances.empty()) view.utterances.push_back(p.utterances.back());
            apply(view, id, *p.pending);
            cur = &view;
        }
        auto report = [&](Millis start) {
            if (p.reported.insert(start).second) found.push_back({id, start});
        };
        for (std::size_t i = p.unchecked; i < p.utterances.size(); ++i) {
            if (p.utterances[i].duration() >= policy_.t_turn_ms) report(p.utterances[i].start_ms);
        }
        if (!p.utterances.empty()) p.unchecked = p.utterances.size() - 1;
        if (cur == &view) {
            for (const auto& u : view.utterances) {
                if (u.duration() >= policy_.t_turn_ms) report(u.start_ms);
            }
        }
        if (cur->speaking && now_ms >= cur->open_since) {
            Millis start = cur->open_since;
            if (!cur->utterances.empty() &&
                cur->open_since - cur->utterances.back().end_ms < policy_.g_merge_ms)
                start = cur->utterances.back().start_ms;
            if (now_ms - start >= policy_.t_turn_ms) report(start);
        }
    }
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
        return std::tie(a.t_ms, a.participant_id) < std::tie(b.t_ms, b.participant_id);
    });
    return found;
}

std::vector<Utterance> IncrementalSegmenter::finish() const {
    std::vector<Utterance> out;
    for (const auto& [id, src] : participants_) {
        Participant p;
        p.speaking = src.speaking;
        p.open_since = src.open_since;
        p.utterances = src.utterances;
        if (src.pending) apply(p, id, *src.pending);
        if (p.speaking) close_interval(p, id, p.open_since, last_t_);
        out.insert(out.end(), p.utterances.begin(), p.utterances.end());
    }
    std::sort(out.begin(), out.end(), utterance_before);
    return out;
}

}  // namespace riff
