#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "riff/cohort.hpp"
#include "riff/mediator.hpp"
#include "riff/metrics.hpp"
#include "riff/turn_model.hpp"

namespace riff::sim {

struct AgentProfile {
    double talkativeness = 0.25;      // P(start a turn) per free second
    double mean_turn_ms = 6000;
    double backchannel_rate = 3;      // per minute while someone else holds the floor
    double interrupt_propensity = 0.15;
    double mm_sensitivity = 0.5;

    void validate() const;

    friend bool operator==(const AgentProfile&, const AgentProfile&) = default;
};

std::vector<AgentProfile> balanced_profiles(std::size_t n);
/// Agent 0 talks long and often; the rest are quieter.
std::vector<AgentProfile> dominant_profiles(std::size_t n);
/// JSON array of objects with the AgentProfile field names; missing fields
/// keep their defaults.
std::vector<AgentProfile> profiles_from_json(std::string_view text);
std::vector<AgentProfile> load_profiles(const std::string& source, std::size_t n);

struct SimulationOptions {
    std::string meeting_id = "sim";
    Millis duration_ms = 600'000;
    bool mm_on = false;
    std::uint64_t seed = 42;
    MediatorConfig mediator;
    SegmentationPolicy segmentation;
};

struct SimulationResult {
    std::vector<VoiceActivityEvent> events;
    double engagement_mean = 0.0;  // mean mediator engagement level over ticks
};

/// One-second discrete steps. Participants are named p1..pn. The mediator is
/// always computed; it only changes behaviour when mm_on is set.
SimulationResult simulate_meeting(const std::vector<AgentProfile>& profiles, const SimulationOptions& options);

std::string events_to_jsonl(const std::vector<VoiceActivityEvent>& events);

enum class Cell { OnOn, OnOff, OffOn, OffOff };

struct ExperimentDesign {
    std::size_t groups_per_cell = 25;
    std::uint64_t seed = 7;
    Millis task_duration_ms = 600'000;
};

struct ExperimentRow {
    std::string group_type;  // "On/On" etc.
    bool task_a_on = false;
    bool task_b_on = false;
    std::size_t group = 0;
    char task = 'A';
    bool mm = false;
    std::uint64_t seed = 0;
    std::size_t turns = 0;
    double turn_share_variance = 0.0;
    double turn_share_entropy = 0.0;
    std::uint32_t interruptions = 0;
    std::uint32_t affirmations = 0;
    std::uint32_t influences = 0;
    double engagement_mean = 0.0;
};

std::string_view cell_name(Cell cell);

/// Four cells x groups_per_cell x tasks A and B, each a simulated meeting.
/// Group g's task seeds are shared by all four cells.
std::vector<ExperimentRow> run_ab_experiment(const ExperimentDesign& design,
                                             const std::vector<AgentProfile>& profiles);
std::string experiment_to_csv(const std::vector<ExperimentRow>& rows);

double turn_share_variance(const MeetingMetrics& metrics);
double turn_share_entropy(const MeetingMetrics& metrics);

struct CohortGenParams {
    std::size_t n_students = 83;
    double beta0 = -2.0;
    double beta1 = 0.6931471805599453;  // log-odds of a certificate per early call
    double early_calls_mean = 3.0;
    double late_calls_mean = 3.0;
    double grade_base = 55.0;
    double grade_slope = 3.0;  // points per call (total)
    double noise_sd = 10.0;
    double pitch_beta0 = -1.0;
    double pitch_beta1 = 0.4;
    double dropout_fraction = 0.5;  // of students without a certificate
    double pass_mark = 70.0;
    std::uint64_t seed = 11;

    void validate() const;
};

CohortTable synth_cohort(const CohortGenParams& params);

}  // namespace riff::sim
