#include "riff/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include <json.hpp>

#include "riff/error.hpp"

namespace riff {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(PairKind kind) {
    switch (kind) {
        case PairKind::Influence: return "influence";
        case PairKind::Interruption: return "interruption";
        case PairKind::Affirmation: return "affirmation";
    }
    return "?";
}

PairKind pair_kind_from_string(std::string_view name) {
    if (name == "influence") return PairKind::Influence;
    if (name == "interruption") return PairKind::Interruption;
    if (name == "affirmation") return PairKind::Affirmation;
    throw Error("malformed_metrics", "unknown pair event kind '" + std::string(name) + "'");
}

void MetricsPolicy::validate() const {
    segmentation.validate();
    if (w_influence_ms <= 0) throw ValidationError("invalid_policy", "w_influence_ms must be > 0");
}

const CountMatrix& MeetingMetrics::matrix(PairKind kind) const {
    switch (kind) {
        case PairKind::Influence: return influences;
        case PairKind::Interruption: return interruptions;
        case PairKind::Affirmation: return affirmations;
    }
    return influences;
}

std::optional<std::size_t> MeetingMetrics::participant_index(std::string_view id) const {
    for (std::size_t i = 0; i < participants.size(); ++i)
        if (participants[i].participant_id == id) return i;
    return std::nullopt;
}

bool operator==(const MeetingMetrics& a, const MeetingMetrics& b) {
    return a.meeting_id == b.meeting_id && a.started_at == b.started_at &&
           a.duration_ms == b.duration_ms &&
           a.policy.segmentation.g_merge_ms == b.policy.segmentation.g_merge_ms &&
           a.policy.segmentation.t_turn_ms == b.policy.segmentation.t_turn_ms &&
           a.policy.w_influence_ms == b.policy.w_influence_ms && a.participants == b.participants &&
           a.influences == b.influences && a.interruptions == b.interruptions &&
           a.affirmations == b.affirmations && a.events == b.events && a.timeline == b.timeline;
}

std::vector<SpeakingShare> speaking_shares(std::span<const Turn> turns,
                                           std::span<const Utterance> utterances,
                                           std::span<const std::string> participants) {
    std::map<std::string, std::size_t> index;
    std::vector<SpeakingShare> shares;
    for (const auto& id : participants) {
        if (index.emplace(id, shares.size()).second) shares.push_back({id});
    }
    auto slot = [&](const std::string& id) -> SpeakingShare& {
        auto it = index.find(id);
        if (it == index.end()) throw Error("unknown_participant", "'" + id + "' is not in the roster");
        return shares[it->second];
    };
    std::size_t total_turns = 0;
    Millis total_ms = 0;
    for (const auto& t : turns) {
        ++slot(t.utterance.participant_id).turn_count;
        ++total_turns;
    }
    for (const auto& u : utterances) {
        slot(u.participant_id).speech_ms += u.duration();
        total_ms += u.duration();
    }
    for (auto& s : shares) {
        s.turn_share = total_turns ? static_cast<double>(s.turn_count) / static_cast<double>(total_turns) : 0.0;
        s.time_share = total_ms ? static_cast<double>(s.speech_ms) / static_cast<double>(total_ms) : 0.0;
    }
    return shares;
}

std::vector<PairEvent> classify_pair_events(std::span<const Utterance> utterances,
                                            const MetricsPolicy& policy) {
    policy.validate();
    const Millis t_turn = policy.segmentation.t_turn_ms;
    std::vector<PairEvent> out;
    // Sweep in canonical order; `active` holds earlier utterances still running.
    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < utterances.size(); ++j) {
        const auto& u = utterances[j];
        std::erase_if(active, [&](std::size_t i) { return utterances[i].end_ms <= u.start_ms; });
        for (std::size_t i : active) {
            const auto& held = utterances[i];
            if (held.participant_id == u.participant_id) continue;
            if (held.duration() < t_turn) continue;
            PairEvent e;
            e.actor = u.participant_id;
            e.counterpart = held.participant_id;
            e.actor_utterance = j;
            e.counterpart_utterance = i;
            if (u.duration() >= t_turn && u.end_ms >= held.end_ms) {
                e.kind = PairKind::Interruption;
                e.t_ms = held.end_ms;
            } else {
                e.kind = PairKind::Affirmation;
                e.t_ms = u.end_ms;
            }
            out.push_back(std::move(e));
        }
        active.push_back(j);
    }
    return out;
}

std::vector<PairEvent> detect_influences(std::span<const Utterance> utterances,
                                         const MetricsPolicy& policy) {
    policy.validate();
    std::vector<std::size_t> turns;
    for (std::size_t i = 0; i < utterances.size(); ++i)
        if (utterances[i].duration() >= policy.segmentation.t_turn_ms) turns.push_back(i);
    std::vector<PairEvent> out;
    for (std::size_t k = 1; k < turns.size(); ++k) {
        const auto& prev = utterances[turns[k - 1]];
        const auto& next = utterances[turns[k]];
        if (prev.participant_id == next.participant_id) continue;
        const Millis gap = next.start_ms - prev.end_ms;
        if (gap < 0 || gap > policy.w_influence_ms) continue;
        out.push_back({PairKind::Influence, prev.participant_id, next.participant_id, next.start_ms,
                       turns[k - 1], turns[k]});
    }
    return out;
}

MeetingMetrics build_metrics(std::vector<Utterance> utterances, Millis duration_ms,
                             const AggregateOptions& options) {
    options.policy.validate();
    std::sort(utterances.begin(), utterances.end(), utterance_before);

    MeetingMetrics m;
    m.meeting_id = options.meeting_id;
    m.started_at = options.started_at;
    m.duration_ms = duration_ms;
    m.policy = options.policy;

    std::vector<std::string> roster = options.roster;
    {
        std::set<std::string> known(roster.begin(), roster.end());
        for (const auto& u : utterances)
            if (known.insert(u.participant_id).second) roster.push_back(u.participant_id);
    }

    const auto split = classify_turns(utterances, options.policy.segmentation);
    m.participants = speaking_shares(split.turns, utterances, roster);

    m.events = classify_pair_events(utterances, options.policy);
    auto influences = detect_influences(utterances, options.policy);
    m.events.insert(m.events.end(), influences.begin(), influences.end());
    std::stable_sort(m.events.begin(), m.events.end(), [](const PairEvent& a, const PairEvent& b) {
        return std::tie(a.t_ms, a.actor_utterance, a.counterpart_utterance) <
               std::tie(b.t_ms, b.actor_utterance, b.counterpart_utterance);
    });

    const std::size_t n = m.participants.size();
    m.influences.assign(n, std::vector<std::uint32_t>(n, 0));
    m.interruptions = m.influences;
    m.affirmations = m.influences;

    m.timeline.reserve(utterances.size());
    for (const auto& u : utterances)
        m.timeline.push_back({u, u.duration() >= options.policy.segmentation.t_turn_ms, {}});

    for (std::size_t k = 0; k < m.events.size(); ++k) {
        const auto& e = m.events[k];
        const auto a = *m.participant_index(e.actor);
        const auto c = *m.participant_index(e.counterpart);
        CountMatrix& mat = e.kind == PairKind::Influence      ? m.influences
                           : e.kind == PairKind::Interruption ? m.interruptions
                                                              : m.affirmations;
        ++mat[a][c];
        m.timeline[e.actor_utterance].events.emplace_back(k, EventRole::Actor);
        m.timeline[e.counterpart_utterance].events.emplace_back(k, EventRole::Counterpart);
    }
    return m;
}

MeetingMetrics aggregate_meeting(std::span<const VoiceActivityEvent> log, const AggregateOptions& options) {
    const auto normalized = normalize_events(log);
    auto utterances = segment_utterances(normalized, options.policy.segmentation);

    AggregateOptions opts = options;
    if (opts.meeting_id.empty() && !log.empty()) opts.meeting_id = log.front().meeting_id;
    {
        // first-appearance order in the raw log for participants not in the roster
        std::set<std::string> known(opts.roster.begin(), opts.roster.end());
        for (const auto& e : log)
            if (known.insert(e.participant_id).second) opts.roster.push_back(e.participant_id);
    }
    Millis duration = 0;
    for (const auto& e : log) duration = std::max(duration, e.t_ms);
    return build_metrics(std::move(utterances), duration, opts);
}

MeetingAggregator::MeetingAggregator(AggregateOptions options)
    : options_(std::move(options)), segmenter_(options_.policy.segmentation) {
    options_.policy.validate();
}

void MeetingAggregator::add(std::span<const VoiceActivityEvent> chunk) {
    for (const auto& e : chunk) {
        if (e.t_ms < 0) throw Error("negative_timestamp", "t_ms " + std::to_string(e.t_ms));
    }
    for (const auto& e : chunk) {
        if (first_meeting_.empty() && seen_order_.empty()) first_meeting_ = e.meeting_id;
        if (std::find(seen_order_.begin(), seen_order_.end(), e.participant_id) == seen_order_.end())
            seen_order_.push_back(e.participant_id);
        segmenter_.push(e);
    }
}

MeetingMetrics MeetingAggregator::result() const {
    AggregateOptions opts = options_;
    if (opts.meeting_id.empty()) opts.meeting_id = first_meeting_;
    for (const auto& id : seen_order_)
        if (std::find(opts.roster.begin(), opts.roster.end(), id) == opts.roster.end())
            opts.roster.push_back(id);
    return build_metrics(segmenter_.finish(), segmenter_.last_timestamp(), opts);
}

HistorySeries meeting_history(std::span<const MeetingMetrics> metrics) {
    for (std::size_t i = 1; i < metrics.size(); ++i) {
        if (metrics[i].started_at < metrics[i - 1].started_at)
            throw Error("unsorted_history", "meeting '" + metrics[i].meeting_id +
                                                "' starts before its predecessor");
    }
    HistorySeries h;
    const std::size_t count = metrics.size();
    for (std::size_t k = 0; k < count; ++k) {
        const auto& m = metrics[k];
        h.meeting_ids.push_back(m.meeting_id);
        h.started_at.push_back(m.started_at);
        const std::size_t n = m.participants.size();
        for (std::size_t i = 0; i < n; ++i) {
            auto& series = h.participants[m.participants[i].participant_id];
            series.resize(count);
            auto& pt = series[k];
            pt.present = true;
            pt.turn_share = m.participants[i].turn_share;
            for (std::size_t j = 0; j < n; ++j) {
                pt.influences_made += m.influences[i][j];
                pt.influences_received += m.influences[j][i];
                pt.interruptions_made += m.interruptions[i][j];
                pt.interruptions_received += m.interruptions[j][i];
                pt.affirmations_made += m.affirmations[i][j];
                pt.affirmations_received += m.affirmations[j][i];
            }
        }
    }
    return h;
}

// ---------------------------------------------------------------------------

std::string metrics_to_json(const MeetingMetrics& m) {
    ordered_json j;
    j["meeting"] = m.meeting_id;
    j["started_at"] = m.started_at;
    j["duration_ms"] = m.duration_ms;
    j["policy"] = {{"g_merge_ms", m.policy.segmentation.g_merge_ms},
                   {"t_turn_ms", m.policy.segmentation.t_turn_ms},
                   {"w_influence_ms", m.policy.w_influence_ms}};
    ordered_json parts = ordered_json::array();
    for (const auto& s : m.participants) {
        parts.push_back({{"id", s.participant_id},
                         {"turn_count", s.turn_count},
                         {"speech_ms", s.speech_ms},
                         {"turn_share", s.turn_share},
                         {"time_share", s.time_share}});
    }
    j["participants"] = std::move(parts);
    j["influences"] = m.influences;
    j["interruptions"] = m.interruptions;
    j["affirmations"] = m.affirmations;
    ordered_json events = ordered_json::array();
    for (const auto& e : m.events) {
        events.push_back({{"kind", to_string(e.kind)},
                          {"actor", e.actor},
                          {"counterpart", e.counterpart},
                          {"t_ms", e.t_ms},
                          {"actor_utterance", e.actor_utterance},
                          {"counterpart_utterance", e.counterpart_utterance}});
    }
    j["events"] = std::move(events);
    ordered_json timeline = ordered_json::array();
    for (const auto& t : m.timeline) {
        ordered_json refs = ordered_json::array();
        for (const auto& [idx, role] : t.events)
            refs.push_back({{"event", idx}, {"role", role == EventRole::Actor ? "actor" : "counterpart"}});
        timeline.push_back({{"participant", t.utterance.participant_id},
                            {"start_ms", t.utterance.start_ms},
                            {"end_ms", t.utterance.end_ms},
                            {"turn", t.is_turn},
                            {"events", std::move(refs)}});
    }
    j["timeline"] = std::move(timeline);
    return j.dump(2) + "\n";
}

MeetingMetrics metrics_from_json(std::string_view text) {
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error("malformed_json", "cannot parse metrics document");
    try {
        MeetingMetrics m;
        m.meeting_id = j.at("meeting").get<std::string>();
        m.started_at = j.at("started_at").get<std::int64_t>();
        m.duration_ms = j.at("duration_ms").get<Millis>();
        const auto& p = j.at("policy");
        m.policy.segmentation.g_merge_ms = p.at("g_merge_ms").get<Millis>();
        m.policy.segmentation.t_turn_ms = p.at("t_turn_ms").get<Millis>();
        m.policy.w_influence_ms = p.at("w_influence_ms").get<Millis>();
        for (const auto& s : j.at("participants")) {
            m.participants.push_back({s.at("id").get<std::string>(), s.at("turn_count").get<std::size_t>(),
                                      s.at("speech_ms").get<Millis>(), s.at("turn_share").get<double>(),
                                      s.at("time_share").get<double>()});
        }
        m.influences = j.at("influences").get<CountMatrix>();
        m.interruptions = j.at("interruptions").get<CountMatrix>();
        m.affirmations = j.at("affirmations").get<CountMatrix>();
        for (const auto& e : j.at("events")) {
            m.events.push_back({pair_kind_from_string(e.at("kind").get<std::string>()),
                                e.at("actor").get<std::string>(), e.at("counterpart").get<std::string>(),
                                e.at("t_ms").get<Millis>(), e.at("actor_utterance").get<std::size_t>(),
                                e.at("counterpart_utterance").get<std::size_t>()});
        }
        for (const auto& t : j.at("timeline")) {
            TimelineEntry entry;
            entry.utterance = {t.at("participant").get<std::string>(), t.at("start_ms").get<Millis>(),
                               t.at("end_ms").get<Millis>()};
            entry.is_turn = t.at("turn").get<bool>();
            for (const auto& r : t.at("events")) {
                entry.events.emplace_back(r.at("event").get<std::size_t>(),
                                          r.at("role").get<std::string>() == "actor" ? EventRole::Actor
                                                                                     : EventRole::Counterpart);
            }
            m.timeline.push_back(std::move(entry));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed_metrics", e.what());
    }
}

}  // namespace riff
