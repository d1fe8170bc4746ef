#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. None of these call into the library code they check.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "riff/mediator.hpp"
#include "riff/metrics.hpp"
#include "riff/turn_model.hpp"

namespace oracle {

using riff::Millis;
using riff::Utterance;
using riff::VoiceActivityEvent;

/// Random meeting built from non-overlapping per-participant intervals, so the
/// raw event list is already valid and only its order needs repairing.
struct RandomMeeting {
    std::vector<VoiceActivityEvent> events;  // sorted
    std::vector<std::string> participants;
};

inline RandomMeeting random_meeting(std::mt19937_64& rng, int n_participants, int intervals_each, Millis gap_max,
                                    Millis len_max, const std::string& meeting = "m") {
    RandomMeeting m;
    std::uniform_int_distribution<Millis> gap(1, gap_max);
    std::uniform_int_distribution<Millis> len(1, len_max);
    for (int p = 0; p < n_participants; ++p) {
        const std::string id = "p" + std::to_string(p + 1);
        m.participants.push_back(id);
        Millis t = gap(rng) - 1;
        for (int k = 0; k < intervals_each; ++k) {
            const Millis s = t;
            const Millis e = s + len(rng);
            m.events.push_back({meeting, id, s, true});
            m.events.push_back({meeting, id, e, false});
            t = e + gap(rng);
        }
    }
    std::stable_sort(m.events.begin(), m.events.end(), [](const auto& a, const auto& b) {
        return std::tie(a.t_ms, a.participant_id) < std::tie(b.t_ms, b.participant_id);
    });
    return m;
}

/// Per-participant millisecond raster: mark speech, fill short silences,
/// read back runs.
inline std::vector<Utterance> raster_segment(const std::vector<VoiceActivityEvent>& sorted_valid, Millis g_merge) {
    std::map<std::string, std::vector<std::pair<Millis, Millis>>> spans;
    std::map<std::string, Millis> open;
    Millis horizon = 0;
    for (const auto& e : sorted_valid) {
        horizon = std::max(horizon, e.t_ms);
        if (e.speaking) {
            open[e.participant_id] = e.t_ms;
        } else {
            spans[e.participant_id].emplace_back(open.at(e.participant_id), e.t_ms);
        }
    }
    std::vector<Utterance> out;
    for (const auto& [id, list] : spans) {
        std::vector<char> on(static_cast<std::size_t>(horizon) + 1, 0);
        for (auto [s, e] : list)
            for (Millis t = s; t < e; ++t) on[static_cast<std::size_t>(t)] = 1;
        // fill interior silences shorter than g_merge
        Millis t = 0;
        const Millis h = static_cast<Millis>(on.size());
        while (t < h && !on[t]) ++t;
        while (t < h) {
            while (t < h && on[t]) ++t;
            const Millis gap_start = t;
            while (t < h && !on[t]) ++t;
            if (t < h && t - gap_start < g_merge)
                for (Millis k = gap_start; k < t; ++k) on[k] = 1;
        }
        for (Millis k = 0; k < h;) {
            if (!on[k]) {
                ++k;
                continue;
            }
            const Millis s = k;
            while (k < h && on[k]) ++k;
            out.push_back({id, s, k});
        }
    }
    std::sort(out.begin(), out.end(), [](const Utterance& a, const Utterance& b) {
        return std::make_tuple(a.start_ms, -a.end_ms, a.participant_id) <
               std::make_tuple(b.start_ms, -b.end_ms, b.participant_id);
    });
    return out;
}

struct SimpleEvent {
    riff::PairKind kind;
    std::string actor;
    std::string counterpart;
    Millis t_ms;

    friend auto operator<=>(const SimpleEvent&, const SimpleEvent&) = default;
};

/// Every ordered pair of overlapping utterances, classified from scratch.
inline std::vector<SimpleEvent> brute_force_pairs(const std::vector<Utterance>& us, Millis t_turn) {
    auto first = [](const Utterance& a, const Utterance& b) {
        return std::make_tuple(a.start_ms, -a.end_ms, a.participant_id) <
               std::make_tuple(b.start_ms, -b.end_ms, b.participant_id);
    };
    std::vector<SimpleEvent> out;
    for (const auto& a : us) {
        for (const auto& b : us) {
            if (a.participant_id == b.participant_id) continue;
            const bool overlap = a.start_ms < b.end_ms && b.start_ms < a.end_ms;
            if (!overlap || !first(a, b)) continue;
            // a was speaking first; b is the newcomer
            if (a.end_ms - a.start_ms < t_turn) continue;
            const bool b_turn = b.end_ms - b.start_ms >= t_turn;
            if (b_turn && b.end_ms >= a.end_ms)
                out.push_back({riff::PairKind::Interruption, b.participant_id, a.participant_id, a.end_ms});
            else
                out.push_back({riff::PairKind::Affirmation, b.participant_id, a.participant_id, b.end_ms});
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<SimpleEvent> brute_force_influences(const std::vector<Utterance>& us, Millis t_turn, Millis w) {
    std::vector<Utterance> turns;
    for (const auto& u : us)
        if (u.end_ms - u.start_ms >= t_turn) turns.push_back(u);
    std::sort(turns.begin(), turns.end(), [](const Utterance& a, const Utterance& b) {
        return std::make_tuple(a.start_ms, -a.end_ms, a.participant_id) <
               std::make_tuple(b.start_ms, -b.end_ms, b.participant_id);
    });
    std::vector<SimpleEvent> out;
    for (std::size_t k = 0; k + 1 < turns.size(); ++k) {
        const auto& a = turns[k];
        const auto& b = turns[k + 1];
        const Millis gap = b.start_ms - a.end_ms;
        if (a.participant_id != b.participant_id && gap >= 0 && gap <= w)
            out.push_back({riff::PairKind::Influence, a.participant_id, b.participant_id, b.start_ms});
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<SimpleEvent> simplify(const std::vector<riff::PairEvent>& events, bool influences) {
    std::vector<SimpleEvent> out;
    for (const auto& e : events)
        if ((e.kind == riff::PairKind::Influence) == influences) out.push_back({e.kind, e.actor, e.counterpart, e.t_ms});
    std::sort(out.begin(), out.end());
    return out;
}

/// Trailing-window recount of turn onsets at time `now`.
inline std::vector<int> window_counts(const std::vector<std::pair<Millis, std::size_t>>& onsets, std::size_t n,
                                      Millis now, Millis window) {
    std::vector<int> counts(n, 0);
    for (auto [t, i] : onsets)
        if (t > now - window && t <= now) ++counts[i];
    return counts;
}

/// Point-in-convex-polygon (vertices in order) with tolerance; handles n = 1, 2.
inline bool in_hull(const std::vector<riff::Point>& v, riff::Point p, double eps = 1e-9) {
    if (v.size() == 1) return std::hypot(p.x - v[0].x, p.y - v[0].y) <= eps;
    if (v.size() == 2) {
        const double cross = (v[1].x - v[0].x) * (p.y - v[0].y) - (v[1].y - v[0].y) * (p.x - v[0].x);
        const double dot = (p.x - v[0].x) * (v[1].x - v[0].x) + (p.y - v[0].y) * (v[1].y - v[0].y);
        const double len2 = (v[1].x - v[0].x) * (v[1].x - v[0].x) + (v[1].y - v[0].y) * (v[1].y - v[0].y);
        return std::abs(cross) <= eps && dot >= -eps && dot <= len2 + eps;
    }
    int sign = 0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const auto& a = v[k];
        const auto& b = v[(k + 1) % v.size()];
        const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if (std::abs(cross) <= eps) continue;
        const int s = cross > 0 ? 1 : -1;
        if (sign == 0) sign = s;
        if (s != sign) return false;
    }
    return true;
}

/// Two-sided Student-t tail by composite Simpson integration of the density.
inline double t_two_sided_simpson(double t, double df, int intervals = 20000) {
    const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
    auto f = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
    const double b = std::abs(t);
    const double h = b / intervals;
    double s = f(0) + f(b);
    for (int k = 1; k < intervals; ++k) s += f(k * h) * (k % 2 ? 4 : 2);
    return 1.0 - 2.0 * (s * h / 3.0);
}

inline double pearson_two_pass(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= x.size();
    my /= y.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

inline std::vector<double> holm_by_hand(std::vector<double> p) {
    const std::size_t m = p.size();
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return p[a] < p[b] || (p[a] == p[b] && a < b); });
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        double best = 0;
        for (std::size_t j = 0; j <= i; ++j) best = std::max(best, (m - j) * p[idx[j]]);
        out[idx[i]] = std::min(1.0, best);
    }
    return out;
}

}  // namespace oracle
