// Acceptance checks, one per criterion. Each prints a single PASS/FAIL line.
//   riff_acceptance            run all
//   riff_acceptance <name>...  run the named ones
//   riff_acceptance --list

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "riff/cohort.hpp"
#include "riff/metrics.hpp"
#include "riff/replay.hpp"
#include "riff/report.hpp"
#include "riff/server.hpp"
#include "riff/sim.hpp"
#include "riff/stats.hpp"

using namespace riff;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    // records the first failure, keeps going
    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double se_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / (v.size() - 1) / v.size());
}

// ---------------------------------------------------------------------------

Outcome odds_example() {
    Outcome o;
    const double got = stats::odds_ratio_from_odds({1, 5}, {3, 7});
    o.require(std::abs(got - 15.0 / 7.0) <= 1e-12, fmt("got %.17g", got));
    o.detail = o.pass ? fmt("1:5 -> 3:7 gives %.15f (15/7)", got) : o.detail;
    return o;
}

Outcome holm_step_down() {
    Outcome o;
    const std::vector<double> p = {0.01, 0.04, 0.03};
    const auto h = stats::holm_adjust(p);
    const double want[] = {0.03, 0.06, 0.06};
    for (int i = 0; i < 3; ++i) o.require(std::abs(h[i] - want[i]) < 1e-15, fmt("hand case slot %g: %g", i, h[i]));
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0, 1);
    std::uniform_int_distribution<int> len(1, 20);
    for (int round = 0; round < 1000; ++round) {
        std::vector<double> raw(len(rng));
        for (auto& v : raw) v = std::pow(u(rng), 3);
        const auto holm = stats::holm_adjust(raw);
        const auto bonf = stats::bonferroni_adjust(raw);
        const auto hand = oracle::holm_by_hand(raw);
        for (std::size_t i = 0; i < raw.size(); ++i) {
            o.require(raw[i] <= holm[i] && holm[i] <= bonf[i], "ordering raw <= holm <= bonferroni broken");
            o.require(std::abs(holm[i] - hand[i]) <= 1e-15, "disagrees with the step-down oracle");
            for (std::size_t j = 0; j < raw.size(); ++j)
                if (raw[i] < raw[j]) o.require(holm[i] <= holm[j], "adjusted values not monotone");
        }
    }
    if (o.pass) o.detail = "[0.01,0.04,0.03] -> [0.03,0.06,0.06]; 1000 random vectors ordered and monotone";
    return o;
}

Outcome logistic_recovery() {
    Outcome o;
    auto fit_seed = [&](std::size_t n, std::uint64_t seed) {
        sim::CohortGenParams g;
        g.n_students = n;
        g.seed = seed;
        std::vector<double> x, y;
        for (const auto& r : sim::synth_cohort(g).rows) {
            x.push_back(r.riff_calls_first4wk);
            y.push_back(r.certificate);
        }
        const auto fit = stats::fit_logistic(x, y);
        const auto s = stats::logistic_score(x, y, fit.beta0, fit.beta1);
        o.require(fit.converged, "fit did not converge");
        o.require(std::abs(s.d_beta0) <= 1e-6 && std::abs(s.d_beta1) <= 1e-6,
                  fmt("gradient at optimum (%g, %g)", s.d_beta0, s.d_beta1));
        return fit.odds_ratio;
    };
    std::vector<double> big;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) big.push_back(fit_seed(2000, seed));
    const double mean_big = mean_of(big);
    o.require(mean_big >= 1.9 && mean_big <= 2.1, fmt("n=2000 mean OR %.4f", mean_big));
    int inside = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const double orr = fit_seed(83, seed);
        inside += orr >= 1.4 && orr <= 2.8;
    }
    o.require(inside >= 18, fmt("n=83: %g of 20 seeds in [1.4, 2.8]", inside));
    if (o.pass) o.detail = fmt("n=2000 mean OR %.4f over 20 seeds; n=83 in range for %g/20", mean_big, inside);
    return o;
}

Outcome pearson_p_value() {
    Outcome o;
    const double p = stats::pearson_p(0.5, 62).p;
    const double t = 0.5 * std::sqrt(60.0 / 0.75);
    const double quad = oracle::t_two_sided_simpson(t, 60);
    o.require(p >= 3.0e-5 && p <= 4.0e-5, fmt("p = %.4e outside [3e-5, 4e-5]", p));
    o.require(std::abs(p - quad) <= 1e-9, fmt("p = %.10e vs quadrature %.10e", p, quad));
    o.require(p <= 1.56e-4, fmt("p = %.4e above the reference corrected 1.56e-04", p));
    if (o.pass) o.detail = fmt("pearson_p(0.5, 62) = %.6e, quadrature %.6e", p, quad);
    return o;
}

Outcome significance_stars() {
    Outcome o;
    // reference (p, stars) pairs, sixteen cells over four result tables
    const std::pair<double, const char*> cells[] = {
        {1.56e-04, "***"}, {2.54e-03, "**"},   {1.56e-04, "***"},  {2.94e-02, "*"},    {5.25e-03, "**"},
        {1.56e-04, "***"}, {6.92e-03, "**"},   {3.96e-04, "***"},  {5.40e-07, "****"}, {5.22e-05, "****"},
        {3.89e-06, "****"}, {2.07e-06, "****"}, {3.95e-05, "****"}, {3.89e-06, "****"}, {1.03e-04, "***"},
        {1.96e-05, "****"},
    };
    int matched = 0;
    for (const auto& [p, want] : cells) {
        const auto got = stats::significance_stars(p);
        o.require(got == want, fmt("p = %.2e gave a different star count", p));
        matched += got == want;
    }
    if (o.pass) o.detail = fmt("%g of %g table cells match", matched, std::size(cells));
    return o;
}

Outcome metrics_oracle() {
    Outcome o;
    MetricsPolicy pol;
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> size(2, 8);
    std::uniform_int_distribution<int> kind(0, 2);
    std::size_t events = 0;
    for (std::uint64_t k = 0; k < 500; ++k) {
        const auto n = size(rng);
        auto profiles = kind(rng) == 0 ? sim::balanced_profiles(n) : sim::dominant_profiles(n);
        for (auto& p : profiles) p.interrupt_propensity = std::min(1.0, p.interrupt_propensity * (1 + kind(rng)));
        sim::SimulationOptions so;
        so.seed = 5000 + k;
        so.mm_on = k % 2 == 1;
        so.duration_ms = 300000;
        const auto log = sim::simulate_meeting(profiles, so).events;
        const auto m = aggregate_meeting(log);
        const auto us = segment_utterances(log, pol.segmentation);
        o.require(oracle::simplify(m.events, false) == oracle::brute_force_pairs(us, pol.segmentation.t_turn_ms),
                  fmt("interruption/affirmation sets differ in meeting %g", k));
        o.require(oracle::simplify(m.events, true) ==
                      oracle::brute_force_influences(us, pol.segmentation.t_turn_ms, pol.w_influence_ms),
                  fmt("influence sets differ in meeting %g", k));
        double sum = 0;
        for (const auto& p : m.participants) sum += p.turn_share;
        if (!m.participants.empty()) o.require(std::abs(sum - 1.0) <= 1e-9, fmt("shares sum to %.12f", sum));
        events += m.events.size();
    }
    if (o.pass) o.detail = fmt("500 simulated meetings, %g pair events, all equal to brute force", events);
    return o;
}

Outcome mediator_window() {
    Outcome o;
    std::mt19937_64 rng(88);
    std::uniform_int_distribution<std::size_t> size(1, 16);
    std::uniform_int_distribution<Millis> gap(0, 15000), phase(0, 999);
    std::uniform_real_distribution<double> u(0, 1);
    std::size_t snapshots = 0, argmax_checks = 0;
    for (int round = 0; round < 200; ++round) {
        const auto n = size(rng);
        MediatorConfig cfg;
        Mediator med("m", cfg);
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < n; ++i) {
            ids.push_back("p" + std::to_string(i + 1));
            med.add_participant(ids.back());
        }
        // skewed speakers so a unique leader is common
        std::vector<double> weight(n);
        for (auto& w : weight) w = u(rng) * u(rng);
        std::discrete_distribution<std::size_t> who(weight.begin(), weight.end());
        std::vector<std::pair<Millis, std::size_t>> onsets;
        for (Millis t = gap(rng); t < 1'200'000; t += gap(rng)) onsets.emplace_back(t, who(rng));
        std::size_t next = 0;
        for (Millis now = phase(rng); now <= 1'250'000; now += cfg.tick_ms) {
            std::vector<TurnOnset> batch;
            for (; next < onsets.size() && onsets[next].first <= now; ++next)
                batch.push_back({ids[onsets[next].second], onsets[next].first});
            const auto s = med.advance(batch, now);
            ++snapshots;
            const auto want = oracle::window_counts(onsets, n, now, cfg.window_ms);
            o.require(s.turn_counts == want, fmt("counts differ from recount at t=%g", now));
            o.require(oracle::in_hull(s.layout, s.node, 1e-9), fmt("node outside hull at t=%g", now));
            const auto top = std::max_element(want.begin(), want.end());
            if (*top > 0 && std::count(want.begin(), want.end(), *top) == 1) {
                ++argmax_checks;
                const auto lead = static_cast<std::size_t>(top - want.begin());
                const double dl = std::hypot(s.node.x - s.layout[lead].x, s.node.y - s.layout[lead].y);
                for (std::size_t i = 0; i < n; ++i)
                    if (i != lead)
                        o.require(dl < std::hypot(s.node.x - s.layout[i].x, s.node.y - s.layout[i].y),
                                  fmt("leader not strictly nearest at t=%g", now));
            }
        }
    }
    if (o.pass) o.detail = fmt("200 schedules, %g snapshots, %g unique-leader checks", snapshots, argmax_checks);
    return o;
}

Outcome live_batch() {
    Outcome o;
    ServerConfig cfg;
    cfg.time_scale = 100;
    Server server(cfg);
    const auto port = server.start();

    auto make = [](const std::string& id, std::uint64_t seed, std::size_t n) {
        sim::SimulationOptions so;
        so.meeting_id = id;
        so.seed = seed;
        so.duration_ms = 600000;
        so.mm_on = true;
        return sim::simulate_meeting(sim::dominant_profiles(n), so).events;
    };
    const auto log_a = make("live-a", 606, 6);
    const auto log_b = make("live-b", 707, 4);

    // both meetings stream at once over separate connections
    ReplayResult got_a, got_b;
    std::string err_a, err_b;
    auto stream = [&](const std::vector<VoiceActivityEvent>& log, ReplayResult& out, std::string& err) {
        try {
            ReplayOptions ro;
            ro.started_at = 1700000000000;
            ro.lead_ms = 5000;
            out = replay_to_server("127.0.0.1", port, log, ro);
        } catch (const std::exception& e) {
            err = e.what();
        }
    };
    std::thread ta(stream, std::cref(log_a), std::ref(got_a), std::ref(err_a));
    std::thread tb(stream, std::cref(log_b), std::ref(got_b), std::ref(err_b));
    ta.join();
    tb.join();
    server.stop();
    o.require(err_a.empty() && err_b.empty(), "replay failed: " + err_a + err_b);
    if (!o.pass) return o;

    std::size_t compared = 0;
    auto check = [&](const std::vector<VoiceActivityEvent>& log, const ReplayResult& live, const std::string& id) {
        AggregateOptions opt;
        opt.meeting_id = id;
        opt.roster = roster_of(log);
        opt.started_at = 1700000000000;
        const auto offline = metrics_to_json(aggregate_meeting(log, opt));
        o.require(live.metrics_doc == offline, id + ": live metrics differ from offline aggregation");

        ReplayOptions ro;
        ro.started_at = 1700000000000;
        const auto ref = replay_offline(log, {}, ro);
        std::map<Millis, std::string> by_t;
        for (const auto& s : ref.snapshots) by_t[nlohmann::json::parse(s).at("t_ms").get<Millis>()] = s;
        o.require(!live.snapshots.empty(), id + ": no snapshots received");
        for (const auto& s : live.snapshots) {
            const auto j = nlohmann::json::parse(s);
            o.require(j.at("meeting") == id, id + ": foreign snapshot received");
            const auto it = by_t.find(j.at("t_ms").get<Millis>());
            o.require(it != by_t.end() && it->second == s, id + ": live snapshot differs from the offline one");
            ++compared;
        }
    };
    check(log_a, got_a, "live-a");
    check(log_b, got_b, "live-b");
    if (o.pass)
        o.detail = fmt("6-person meeting at 100x bit-equal; %g live snapshots matched offline, no cross-talk", compared);
    return o;
}

Outcome table5_harness() {
    Outcome o;
    struct Split {
        std::vector<double> on, off, paired;  // paired: per (group, task) mean On minus mean Off
    };
    auto run = [](const std::vector<sim::AgentProfile>& ps) {
        sim::ExperimentDesign d;
        d.groups_per_cell = 25;
        Split out;
        std::map<std::pair<std::size_t, char>, std::pair<double, double>> by_key;
        for (const auto& r : sim::run_ab_experiment(d, ps)) {
            (r.mm ? out.on : out.off).push_back(r.turn_share_variance);
            // each (group, task) is run twice with the mediator and twice without
            auto& k = by_key[{r.group, r.task}];
            (r.mm ? k.first : k.second) += r.turn_share_variance / 2;
        }
        for (const auto& [key, v] : by_key) out.paired.push_back(v.first - v.second);
        return out;
    };
    const auto active = run(sim::dominant_profiles(4));
    const double on = mean_of(active.on), off = mean_of(active.off);
    o.require(on < off, fmt("mean variance on %.5f not below off %.5f", on, off));

    auto inert = sim::dominant_profiles(4);
    for (auto& p : inert) p.mm_sensitivity = 0;
    const auto null = run(inert);
    const double diff = mean_of(null.on) - mean_of(null.off);
    const double ci = 1.96 * se_of(null.paired);
    // 1e-12 absorbs summation order only
    o.require(std::abs(diff) <= ci + 1e-12, fmt("sensitivity 0: difference %.5f outside +-%.5f", diff, ci));
    for (double d : null.paired) o.require(d == 0.0, "sensitivity 0: a group's On and Off runs differ");
    if (o.pass)
        o.detail = fmt("variance on %.4f < off %.4f (paired diff %.4f); ", on, off, mean_of(active.paired)) +
                   fmt("inert: every On run equals its Off twin, difference %.5f", diff);
    return o;
}

Outcome net_promoter() {
    Outcome o;
    const std::vector<int> fixture = {10, 10, 9, 9, 9, 8, 8, 7, 6, 5};
    const std::vector<int> tens(10, 10);
    const int a = stats::nps(fixture), b = stats::nps(tens);
    o.require(a == 30, fmt("fixture gives %g", a));
    o.require(b == 100, fmt("all tens give %g", b));
    if (o.pass) o.detail = fmt("fixture %g, all tens %g", a, b);
    return o;
}

std::pair<int, std::string> run_cli(const std::string& args) {
    const std::string cmd = std::string(RIFF_CLI) + " " + args + " 2>&1";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return {-1, ""};
    std::string out;
    char buf[4096];
    for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) out.append(buf, n);
    const int status = ::pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

Outcome cli_end_to_end() {
    Outcome o;
    const std::string fixture = std::string(RIFF_TEST_DATA) + "/cohort_n83_seed11.csv";
    const std::set<std::string> correlation_rows = {"Final Grades", "Coding Exercise Grades",
                                                    "Capstone Exercise Grades", "Collaboration Exercise Grades",
                                                    "Pitch Video Completion", "Certificate Earned"};
    for (const std::string mode : {"completers", "all"}) {
        const auto args = "report --input " + fixture + " --cohort " + mode;
        const auto first = run_cli(args);
        const auto second = run_cli(args);
        o.require(first.first == 0, mode + ": exit code " + std::to_string(first.first));
        o.require(first.second == second.second, mode + ": output differs between runs");

        // split the table text into its two blocks of data rows
        std::vector<std::vector<std::string>> blocks;
        std::istringstream in(first.second);
        bool in_rows = false;
        for (std::string line; std::getline(in, line);) {
            if (line.rfind("Attribute", 0) == 0) {
                blocks.emplace_back();
                in_rows = true;
            } else if (line.empty()) {
                in_rows = false;
            } else if (in_rows) {
                blocks.back().push_back(line);
            }
        }
        o.require(blocks.size() == 2, mode + ": expected two tables");
        if (blocks.size() != 2) continue;
        o.require(blocks[0].size() == 6 && blocks[1].size() == 2,
                  mode + ": table sizes " + std::to_string(blocks[0].size()) + " + " + std::to_string(blocks[1].size()));
        for (const auto& row : blocks[0]) {
            bool known = false;
            for (const auto& name : correlation_rows) known = known || row.rfind(name + " ", 0) == 0;
            o.require(known, mode + ": unexpected row '" + row + "'");
        }

        const auto json = run_cli(args + " --format json");
        o.require(json.first == 0 && json.second == run_cli(args + " --format json").second,
                  mode + ": json output not stable");
    }
    if (o.pass) o.detail = "6 + 2 rows in completers and all modes, identical bytes on rerun";
    return o;
}

struct Criterion {
    const char* name;
    double limit_s;  // 0: no limit stated
    std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all = {
        {"odds_ratio_example", 1, odds_example},
        {"holm_step_down", 1, holm_step_down},
        {"logistic_recovery", 10, logistic_recovery},
        {"pearson_p_consistency", 1, pearson_p_value},
        {"significance_stars", 1, significance_stars},
        {"metrics_oracle_equivalence", 30, metrics_oracle},
        {"mediator_window_exactness", 30, mediator_window},
        {"live_batch_agreement", 20, live_batch},
        {"table5_harness", 60, table5_harness},
        {"nps", 1, net_promoter},
        {"cli_end_to_end", 0, cli_end_to_end},
    };
    return all;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> wanted(argv + 1, argv + argc);
    if (wanted.size() == 1 && wanted[0] == "--list") {
        for (const auto& c : criteria()) std::printf("%s\n", c.name);
        return 0;
    }
    int failures = 0, ran = 0;
    for (const auto& c : criteria()) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.name) == wanted.end()) continue;
        ++ran;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.limit_s > 0 && secs > c.limit_s && out.pass) {
            out.pass = false;
            out.detail = fmt("took %.2f s, limit %.0f s", secs, c.limit_s);
        }
        std::printf("%s %s (%.2f s): %s\n", out.pass ? "PASS" : "FAIL", c.name, secs, out.detail.c_str());
        std::fflush(stdout);
        failures += !out.pass;
    }
    if (ran == 0) {
        std::fprintf(stderr, "no such criterion\n");
        return 2;
    }
    return failures == 0 ? 0 : 1;
}
