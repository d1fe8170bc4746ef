#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace riff {

using Millis = std::int64_t;

/// A speaking onset (speaking == true) or offset reported by a client's
/// voice-activity detector. Timestamps are meeting-relative milliseconds.
struct VoiceActivityEvent {
    std::string meeting_id;
    std::string participant_id;
    Millis t_ms = 0;
    bool speaking = false;

    friend bool operator==(const VoiceActivityEvent&, const VoiceActivityEvent&) = default;
};

struct Utterance {
    std::string participant_id;
    Millis start_ms = 0;
    Millis end_ms = 0;

    Millis duration() const { return end_ms - start_ms; }

    friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Turn {
    Utterance utterance;
    std::size_t index = 0;

    friend bool operator==(const Turn&, const Turn&) = default;
};

struct SegmentationPolicy {
    Millis g_merge_ms = 300;
    Millis t_turn_ms = 1000;

    /// Throws ValidationError when the thresholds are inconsistent.
    void validate() const;
};

struct TurnSplit {
    std::vector<Turn> turns;
    std::vector<Utterance> backchannels;
};

// Event log line format, shared with the server wire protocol:
//   {"meeting":"m1","participant":"p2","t_ms":12345,"speaking":true}
std::string to_jsonl(const VoiceActivityEvent& event);
VoiceActivityEvent parse_event_line(std::string_view line);
std::vector<VoiceActivityEvent> read_event_log(const std::string& path);
void write_event_log(const std::string& path, std::span<const VoiceActivityEvent> events);

/// Canonical utterance order: start, then longer first, then participant id.
bool utterance_before(const Utterance& a, const Utterance& b);

/// Sorts by time and repairs the stream so each participant strictly
/// alternates onset/offset. Duplicate onsets and orphan offsets are dropped;
/// an onset still open at the end is closed at `close_dangling_at`, or at the
/// last observed timestamp when not given. Negative timestamps throw an
/// Error("negative_timestamp") naming the offending index.
std::vector<VoiceActivityEvent> normalize_events(
    std::span<const VoiceActivityEvent> events,
    std::optional<Millis> close_dangling_at = std::nullopt);

/// Pairs normalized onsets/offsets into intervals and merges same-participant
/// intervals separated by less than g_merge_ms. Zero-length intervals are
/// discarded. Output is in canonical utterance order.
std::vector<Utterance> segment_utterances(std::span<const VoiceActivityEvent> events,
                                          const SegmentationPolicy& policy);

/// Utterances lasting at least t_turn_ms become turns (indexed in canonical
/// order); the rest are kept as backchannel candidates.
TurnSplit classify_turns(std::span<const Utterance> utterances, const SegmentationPolicy& policy);

struct TurnOnset {
    std::string participant_id;
    Millis t_ms = 0;

    friend bool operator==(const TurnOnset&, const TurnOnset&) = default;
};

/// Streaming counterpart of normalize_events + segment_utterances.
///
/// Events are pushed in arrival order. Per participant, events sharing a
/// timestamp are buffered until a later timestamp arrives so that
/// same-instant onset/offset pairs resolve exactly as in the batch path.
/// A late event (earlier than that participant's newest timestamp) triggers a
/// rebuild of that participant from its buffered history.
class IncrementalSegmenter {
public:
    explicit IncrementalSegmenter(SegmentationPolicy policy = {});

    /// Throws Error("negative_timestamp") for t_ms < 0.
    void push(const VoiceActivityEvent& event);

    /// Turns whose qualification is known from the events pushed so far,
    /// judging any still-open speech as lasting until `now_ms`. Each turn is
    /// reported once, identified by its start.
    std::vector<TurnOnset> poll_turns(Millis now_ms);

    /// Closes dangling speech at the newest timestamp seen and returns the
    /// same utterances segment_utterances would produce for the whole stream.
    std::vector<Utterance> finish() const;

    Millis last_timestamp() const { return last_t_; }

private:
    struct Group {
        Millis t = 0;
        bool onset = false;
        bool offset = false;
    };

    struct Participant {
        std::vector<VoiceActivityEvent> history;
        bool speaking = false;
        Millis open_since = 0;
        std::vector<Utterance> utterances;  // the last one may still grow by merging
        std::size_t unchecked = 0;          // first utterance not yet tested for turn status
        std::optional<Group> pending;
        std::set<Millis> reported;
    };

    void apply(Participant& p, const std::string& id, const Group& g) const;
    void close_interval(Participant& p, const std::string& id, Millis start, Millis end) const;
    void rebuild(Participant& p, const std::string& id) const;

    SegmentationPolicy policy_;
    std::map<std::string, Participant> participants_;
    Millis last_t_ = 0;
};

}  // namespace riff
