#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riff/turn_model.hpp"

namespace riff {

enum class PairKind { Influence, Interruption, Affirmation };

std::string_view to_string(PairKind kind);
PairKind pair_kind_from_string(std::string_view name);

/// An ordered interaction between two participants. Utterance indices refer
/// to the canonical-order utterance list the event was computed from.
struct PairEvent {
    PairKind kind = PairKind::Influence;
    std::string actor;
    std::string counterpart;
    Millis t_ms = 0;
    std::size_t actor_utterance = 0;
    std::size_t counterpart_utterance = 0;

    friend bool operator==(const PairEvent&, const PairEvent&) = default;
};

struct MetricsPolicy {
    SegmentationPolicy segmentation;
    Millis w_influence_ms = 3000;

    void validate() const;
};

struct SpeakingShare {
    std::string participant_id;
    std::size_t turn_count = 0;
    Millis speech_ms = 0;
    double turn_share = 0.0;
    double time_share = 0.0;

    friend bool operator==(const SpeakingShare&, const SpeakingShare&) = default;
};

/// Square matrix indexed [actor][counterpart] in roster order.
using CountMatrix = std::vector<std::vector<std::uint32_t>>;

enum class EventRole { Actor, Counterpart };

struct TimelineEntry {
    Utterance utterance;
    bool is_turn = false;
    /// (index into MeetingMetrics::events, this utterance's role in it)
    std::vector<std::pair<std::size_t, EventRole>> events;

    friend bool operator==(const TimelineEntry&, const TimelineEntry&) = default;
};

struct MeetingMetrics {
    std::string meeting_id;
    std::int64_t started_at = 0;  // epoch milliseconds, supplied by the caller
    Millis duration_ms = 0;
    MetricsPolicy policy;
    std::vector<SpeakingShare> participants;
    CountMatrix influences;
    CountMatrix interruptions;
    CountMatrix affirmations;
    std::vector<PairEvent> events;
    std::vector<TimelineEntry> timeline;

    const CountMatrix& matrix(PairKind kind) const;
    std::optional<std::size_t> participant_index(std::string_view id) const;

    friend bool operator==(const MeetingMetrics& a, const MeetingMetrics& b);
};

/// Turn and speaking-time shares for each listed participant, in that order.
/// Throws Error("unknown_participant") if a turn or utterance belongs to
/// someone not listed.
std::vector<SpeakingShare> speaking_shares(std::span<const Turn> turns,
                                           std::span<const Utterance> utterances,
                                           std::span<const std::string> participants);

/// Interruptions and affirmations for every overlapping pair of utterances
/// whose earlier-starting member is a turn. `utterances` must be in canonical
/// order (see utterance_before).
std::vector<PairEvent> classify_pair_events(std::span<const Utterance> utterances,
                                            const MetricsPolicy& policy);

/// Influence events between consecutive turns by different participants that
/// follow within the influence window without overlapping.
std::vector<PairEvent> detect_influences(std::span<const Utterance> utterances,
                                         const MetricsPolicy& policy);

struct AggregateOptions {
    std::string meeting_id;  // empty: taken from the first event
    /// Participant order for shares and matrices. Participants appearing in
    /// the log but not listed are appended in order of first appearance.
    std::vector<std::string> roster;
    std::int64_t started_at = 0;
    MetricsPolicy policy;
};

/// Builds MeetingMetrics from already segmented utterances.
MeetingMetrics build_metrics(std::vector<Utterance> utterances, Millis duration_ms,
                             const AggregateOptions& options);

/// normalize -> segment -> classify -> pairwise, in one call.
MeetingMetrics aggregate_meeting(std::span<const VoiceActivityEvent> log,
                                 const AggregateOptions& options = {});

/// Accepts a log in arbitrary chunks and produces the same MeetingMetrics as
/// aggregate_meeting over the concatenation.
class MeetingAggregator {
public:
    explicit MeetingAggregator(AggregateOptions options = {});

    void add(std::span<const VoiceActivityEvent> chunk);
    MeetingMetrics result() const;

private:
    AggregateOptions options_;
    IncrementalSegmenter segmenter_;
    std::vector<std::string> seen_order_;
    std::string first_meeting_;
};

struct ParticipantHistoryPoint {
    bool present = false;
    double turn_share = 0.0;
    std::uint32_t influences_made = 0;
    std::uint32_t influences_received = 0;
    std::uint32_t interruptions_made = 0;
    std::uint32_t interruptions_received = 0;
    std::uint32_t affirmations_made = 0;
    std::uint32_t affirmations_received = 0;
};

struct HistorySeries {
    std::vector<std::string> meeting_ids;
    std::vector<std::int64_t> started_at;
    /// participant -> one point per meeting (absent meetings have present == false)
    std::map<std::string, std::vector<ParticipantHistoryPoint>> participants;
};

/// Per-meeting series for history charts. Input must be sorted by started_at.
HistorySeries meeting_history(std::span<const MeetingMetrics> metrics);

// Stable JSON document (field order fixed) for <meeting_id>.metrics.json.
std::string metrics_to_json(const MeetingMetrics& metrics);
MeetingMetrics metrics_from_json(std::string_view text);

}  // namespace riff
