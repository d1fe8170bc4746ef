#include "riff/sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "riff/error.hpp"
#include "riff/rng.hpp"
#include "riff/stats.hpp"

namespace riff::sim {

namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

std::string participant_name(std::size_t i) { return "p" + std::to_string(i + 1); }

}  // namespace

void AgentProfile::validate() const {
    auto fail = [](const std::string& what) { throw ValidationError("invalid_profile", what); };
    if (!in_unit(talkativeness)) fail("talkativeness must be in [0, 1]");
    if (!(mean_turn_ms > 0.0)) fail("mean_turn_ms must be > 0");
    if (!(backchannel_rate >= 0.0 && backchannel_rate <= 60.0)) fail("backchannel_rate must be in [0, 60] per minute");
    if (!in_unit(interrupt_propensity)) fail("interrupt_propensity must be in [0, 1]");
    if (!in_unit(mm_sensitivity)) fail("mm_sensitivity must be in [0, 1]");
}

std::vector<AgentProfile> balanced_profiles(std::size_t n) {
    return std::vector<AgentProfile>(n, AgentProfile{0.25, 6000, 3, 0.15, 0.5});
}

std::vector<AgentProfile> dominant_profiles(std::size_t n) {
    std::vector<AgentProfile> out(n, AgentProfile{0.12, 5000, 3, 0.1, 0.8});
    if (n > 0) out[0] = AgentProfile{0.7, 10000, 1, 0.4, 0.8};
    return out;
}

std::vector<AgentProfile> profiles_from_json(std::string_view text) {
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw ValidationError("invalid_profile", "profiles must be a JSON array");
    std::vector<AgentProfile> out;
    try {
        for (const auto& item : j) {
            AgentProfile p;
            p.talkativeness = item.value("talkativeness", p.talkativeness);
            p.mean_turn_ms = item.value("mean_turn_ms", p.mean_turn_ms);
            p.backchannel_rate = item.value("backchannel_rate", p.backchannel_rate);
            p.interrupt_propensity = item.value("interrupt_propensity", p.interrupt_propensity);
            p.mm_sensitivity = item.value("mm_sensitivity", p.mm_sensitivity);
            p.validate();
            out.push_back(p);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("invalid_profile", e.what());
    }
    return out;
}

std::vector<AgentProfile> load_profiles(const std::string& source, std::size_t n) {
    if (source == "balanced") return balanced_profiles(n);
    if (source == "dominant") return dominant_profiles(n);
    std::ifstream in(source);
    if (!in) throw ValidationError("io_error", "cannot open profile file " + source);
    std::stringstream ss;
    ss << in.rdbuf();
    auto profiles = profiles_from_json(ss.str());
    if (profiles.size() != n)
        throw ValidationError("invalid_profile", source + " defines " + std::to_string(profiles.size()) +
                                                     " agents, expected " + std::to_string(n));
    return profiles;
}

// ---------------------------------------------------------------------------

namespace {

struct Interval {
    std::size_t agent = 0;
    Millis start = 0;
    Millis end = 0;
    bool onset_sent = false;
    bool offset_sent = false;
};

struct Draws {
    double start, length, offset, backchannel, extra;
};

class Run {
public:
    Run(const std::vector<AgentProfile>& profiles, const SimulationOptions& options)
        : profiles_(profiles),
          options_(options),
          rng_(options.seed),
          busy_until_(profiles.size(), -1),
          segmenter_(options.segmentation),
          mediator_(options.meeting_id, options.mediator) {
        for (std::size_t i = 0; i < profiles.size(); ++i) {
            ids_.push_back(participant_name(i));
            mediator_.add_participant(ids_.back());
        }
    }

    SimulationResult run() {
        const std::size_t n = profiles_.size();
        const Millis step = 1000;
        double level_sum = 0.0;
        std::size_t ticks = 0;
        for (Millis t = 0; t < options_.duration_ms; t += step) {
            flush(t);
            const auto snap = mediator_.advance(segmenter_.poll_turns(t), t);
            level_sum += snap.engagement_level;
            ++ticks;

            std::vector<double> p(n);
            for (std::size_t i = 0; i < n; ++i) {
                p[i] = profiles_[i].talkativeness;
                if (options_.mm_on && snap.engagement_total > 0) {
                    const double dev = static_cast<double>(n) * (snap.spoke_weights[i] - 1.0 / static_cast<double>(n));
                    p[i] = std::clamp(p[i] * (1.0 - profiles_[i].mm_sensitivity * dev), 0.0, 1.0);
                }
            }
            std::vector<Draws> u(n);
            for (auto& d : u) d = {rng_.uniform(), rng_.uniform(), rng_.uniform(), rng_.uniform(), rng_.uniform()};
            step_at(t, p, u);
        }
        flush(options_.duration_ms);

        std::vector<VoiceActivityEvent> events;
        for (const auto& iv : intervals_) {
            events.push_back({options_.meeting_id, ids_[iv.agent], iv.start, true});
            events.push_back({options_.meeting_id, ids_[iv.agent], iv.end, false});
        }
        SimulationResult result;
        result.events = normalize_events(events);
        result.engagement_mean = ticks ? level_sum / static_cast<double>(ticks) : 0.0;
        return result;
    }

private:
    bool free_at(std::size_t i, Millis t) const { return busy_until_[i] < t; }

    std::size_t add(std::size_t agent, Millis start, Millis end) {
        intervals_.push_back({agent, start, end});
        busy_until_[agent] = end;
        return intervals_.size() - 1;
    }

    Millis turn_length(const Draws& d, std::size_t agent) const {
        return static_cast<Millis>(std::llround(Rng::exponential_from(d.length, profiles_[agent].mean_turn_ms)));
    }

    void step_at(Millis t, const std::vector<double>& p, const std::vector<Draws>& u) {
        const std::size_t n = profiles_.size();
        const Millis end_of_meeting = options_.duration_ms;
        auto offset = [&](const Draws& d) { return t + static_cast<Millis>(std::floor(d.offset * 500.0)); };
        const bool busy = holder_ && intervals_[*holder_].end > t;

        if (!busy) {
            std::optional<std::size_t> best;
            double best_ratio = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!free_at(i, t) || !(u[i].start < p[i])) continue;
                const double ratio = u[i].start / p[i];
                if (!best || ratio < best_ratio) {
                    best = i;
                    best_ratio = ratio;
                }
            }
            if (best) {
                const Millis s = offset(u[*best]);
                const Millis e = std::min(s + std::max<Millis>(200, turn_length(u[*best], *best)), end_of_meeting);
                if (s < e) holder_ = add(*best, s, e);
            }
            return;
        }

        const std::size_t h = intervals_[*holder_].agent;
        std::optional<std::size_t> interrupter;
        double best_ratio = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double threshold = p[i] * profiles_[i].interrupt_propensity;
            if (i == h || !free_at(i, t) || !(u[i].start < threshold)) continue;
            const double ratio = u[i].start / threshold;
            if (!interrupter || ratio < best_ratio) {
                interrupter = i;
                best_ratio = ratio;
            }
        }
        if (interrupter) {
            const auto& d = u[*interrupter];
            const Millis s = offset(d);
            const Millis overlap = 300 + static_cast<Millis>(std::floor(d.extra * 700.0));
            if (s + overlap < intervals_[*holder_].end) {
                intervals_[*holder_].end = s + overlap;
                busy_until_[h] = s + overlap;
                const Millis len = std::max(overlap + 1001, turn_length(d, *interrupter));
                holder_ = add(*interrupter, s, std::min(s + len, end_of_meeting));
            } else {
                interrupter.reset();
            }
        }

        const Interval floor = intervals_[*holder_];
        for (std::size_t i = 0; i < n; ++i) {
            if (i == h || i == floor.agent || (interrupter && i == *interrupter) || !free_at(i, t)) continue;
            if (!(u[i].backchannel < profiles_[i].backchannel_rate / 60.0)) continue;
            const Millis s = offset(u[i]);
            const Millis e = s + 300 + static_cast<Millis>(std::floor(u[i].extra * 500.0));
            if (s > floor.start && e < floor.end) add(i, s, e);
        }
    }

    // Feeds the live segmenter every boundary at or before t.
    void flush(Millis t) {
        struct Pending {
            Millis t;
            std::size_t agent;
            bool speaking;
        };
        std::vector<Pending> out;
        for (std::size_t k = first_live_; k < intervals_.size(); ++k) {
            auto& iv = intervals_[k];
            if (!iv.onset_sent && iv.start <= t) {
                iv.onset_sent = true;
                out.push_back({iv.start, iv.agent, true});
            }
            if (!iv.offset_sent && iv.end <= t) {
                iv.offset_sent = true;
                out.push_back({iv.end, iv.agent, false});
            }
        }
        while (first_live_ < intervals_.size() && intervals_[first_live_].offset_sent) ++first_live_;
        std::stable_sort(out.begin(), out.end(), [](const Pending& a, const Pending& b) {
            if (a.t != b.t) return a.t < b.t;
            return a.agent < b.agent;
        });
        for (const auto& e : out) segmenter_.push({options_.meeting_id, ids_[e.agent], e.t, e.speaking});
    }

    const std::vector<AgentProfile>& profiles_;
    const SimulationOptions& options_;
    Rng rng_;
    std::vector<std::string> ids_;
    std::vector<Interval> intervals_;
    std::size_t first_live_ = 0;
    std::vector<Millis> busy_until_;
    std::optional<std::size_t> holder_;
    IncrementalSegmenter segmenter_;
    Mediator mediator_;
};

}  // namespace

SimulationResult simulate_meeting(const std::vector<AgentProfile>& profiles, const SimulationOptions& options) {
    if (profiles.size() < 2) throw ValidationError("invalid_profile", "simulation needs at least 2 agents");
    if (profiles.size() > kMaxMediatorParticipants)
        throw ValidationError("invalid_profile", "at most " + std::to_string(kMaxMediatorParticipants) + " agents");
    if (options.duration_ms <= 0) throw ValidationError("invalid_argument", "duration must be > 0");
    for (const auto& p : profiles) p.validate();
    options.mediator.validate();
    options.segmentation.validate();
    return Run(profiles, options).run();
}

std::string events_to_jsonl(const std::vector<VoiceActivityEvent>& events) {
    std::string out;
    for (const auto& e : events) out += to_jsonl(e) + "\n";
    return out;
}

// ---------------------------------------------------------------------------

std::string_view cell_name(Cell cell) {
    switch (cell) {
        case Cell::OnOn: return "On/On";
        case Cell::OnOff: return "On/Off";
        case Cell::OffOn: return "Off/On";
        case Cell::OffOff: return "Off/Off";
    }
    return "?";
}

double turn_share_variance(const MeetingMetrics& metrics) {
    const auto& ps = metrics.participants;
    if (ps.empty()) return 0.0;
    double mean = 0.0;
    for (const auto& p : ps) mean += p.turn_share;
    mean /= static_cast<double>(ps.size());
    double var = 0.0;
    for (const auto& p : ps) var += (p.turn_share - mean) * (p.turn_share - mean);
    return var / static_cast<double>(ps.size());
}

double turn_share_entropy(const MeetingMetrics& metrics) {
    double h = 0.0;
    for (const auto& p : metrics.participants)
        if (p.turn_share > 0.0) h -= p.turn_share * std::log(p.turn_share);
    return h;
}

namespace {

std::uint32_t matrix_total(const CountMatrix& m) {
    std::uint32_t total = 0;
    for (const auto& row : m)
        for (auto v : row) total += v;
    return total;
}

}  // namespace

std::vector<ExperimentRow> run_ab_experiment(const ExperimentDesign& design,
                                             const std::vector<AgentProfile>& profiles) {
    if (design.groups_per_cell == 0) throw ValidationError("invalid_argument", "groups per cell must be > 0");
    constexpr std::array<Cell, 4> cells = {Cell::OnOn, Cell::OnOff, Cell::OffOn, Cell::OffOff};
    std::vector<std::string> roster;
    for (std::size_t i = 0; i < profiles.size(); ++i) roster.push_back(participant_name(i));

    std::vector<ExperimentRow> rows;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const bool a_on = cells[c] == Cell::OnOn || cells[c] == Cell::OnOff;
        const bool b_on = cells[c] == Cell::OnOn || cells[c] == Cell::OffOn;
        for (std::size_t g = 0; g < design.groups_per_cell; ++g) {
            for (int task = 0; task < 2; ++task) {
                ExperimentRow row;
                row.group_type = std::string(cell_name(cells[c]));
                row.task_a_on = a_on;
                row.task_b_on = b_on;
                row.group = g + 1;
                row.task = task == 0 ? 'A' : 'B';
                row.mm = task == 0 ? a_on : b_on;
                // common random numbers: group g's task seed is the same in
                // every cell, so cells differ only by the mediator schedule
                row.seed = derive_seed(design.seed, g, static_cast<std::uint64_t>(task), 0);

                SimulationOptions opt;
                opt.meeting_id = "c" + std::to_string(c + 1) + "-g" + std::to_string(g + 1) + "-" + row.task;
                opt.duration_ms = design.task_duration_ms;
                opt.mm_on = row.mm;
                opt.seed = row.seed;
                const auto sim = simulate_meeting(profiles, opt);

                AggregateOptions agg;
                agg.meeting_id = opt.meeting_id;
                agg.roster = roster;
                const auto m = aggregate_meeting(sim.events, agg);
                for (const auto& p : m.participants) row.turns += p.turn_count;
                row.turn_share_variance = turn_share_variance(m);
                row.turn_share_entropy = turn_share_entropy(m);
                row.interruptions = matrix_total(m.interruptions);
                row.affirmations = matrix_total(m.affirmations);
                row.influences = matrix_total(m.influences);
                row.engagement_mean = sim.engagement_mean;
                rows.push_back(row);
            }
        }
    }
    return rows;
}

std::string experiment_to_csv(const std::vector<ExperimentRow>& rows) {
    std::string out =
        "group_type,task_a,task_b,group,task,mm,seed,turns,turn_share_variance,turn_share_entropy,"
        "interruptions,affirmations,influences,engagement_mean\n";
    auto on_off = [](bool b) { return b ? "on" : "off"; };
    char buf[512];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%s,%s,%zu,%c,%s,%llu,%zu,%.9g,%.9g,%u,%u,%u,%.6f\n", r.group_type.c_str(),
                      on_off(r.task_a_on), on_off(r.task_b_on), r.group, r.task, on_off(r.mm),
                      static_cast<unsigned long long>(r.seed), r.turns, r.turn_share_variance, r.turn_share_entropy,
                      r.interruptions, r.affirmations, r.influences, r.engagement_mean);
        out += buf;
    }
    return out;
}

// ---------------------------------------------------------------------------

void CohortGenParams::validate() const {
    if (n_students == 0) throw ValidationError("invalid_argument", "n_students must be > 0");
    if (!(noise_sd >= 0.0)) throw ValidationError("invalid_argument", "noise_sd must be >= 0");
    if (!(early_calls_mean >= 0.0 && late_calls_mean >= 0.0))
        throw ValidationError("invalid_argument", "call means must be >= 0");
    if (!in_unit(dropout_fraction)) throw ValidationError("invalid_argument", "dropout_fraction must be in [0, 1]");
}

CohortTable synth_cohort(const CohortGenParams& params) {
    params.validate();
    Rng rng(params.seed);
    auto grade = [&](double mean) {
        const double v = std::clamp(mean + params.noise_sd * rng.normal(), 0.0, 100.0);
        return std::round(v * 10.0) / 10.0;
    };
    CohortTable table;
    const int width = params.n_students < 1000 ? 3 : static_cast<int>(std::to_string(params.n_students).size());
    for (std::size_t k = 0; k < params.n_students; ++k) {
        CohortRow r;
        char id[32];
        std::snprintf(id, sizeof id, "s%0*zu", width, k + 1);
        r.student_id = id;
        const int early = rng.poisson(params.early_calls_mean);
        const int late = rng.poisson(params.late_calls_mean);
        r.riff_calls_first4wk = early;
        r.riff_calls_total = early + late;
        r.certificate = rng.uniform() < stats::logistic(params.beta0 + params.beta1 * early) ? 1 : 0;
        const double mean = params.grade_base + params.grade_slope * r.riff_calls_total;
        const double g_final = grade(mean);
        const double g_coding = grade(mean);
        const double g_capstone = grade(mean);
        const double g_collab = grade(mean);
        const bool pitch = rng.uniform() < stats::logistic(params.pitch_beta0 + params.pitch_beta1 * r.riff_calls_total);
        const bool drop = rng.uniform() < params.dropout_fraction;
        r.dropped = !r.certificate && drop ? 1 : 0;
        if (!r.dropped) {
            r.final_grade = g_final;
            r.coding_grade = g_coding;
            r.capstone_grade = g_capstone;
            r.collab_grade = g_collab;
            r.pitch_completed = pitch ? 1 : 0;
            r.passed = g_final >= params.pass_mark ? 1 : 0;
        }
        table.rows.push_back(std::move(r));
    }
    return table;
}

}  // namespace riff::sim
