// riff: analytics, simulation and meeting server front end.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "riff/cohort.hpp"
#include "riff/error.hpp"
#include "riff/metrics.hpp"
#include "riff/replay.hpp"
#include "riff/report.hpp"
#include "riff/server.hpp"
#include "riff/sim.hpp"

using riff::Millis;

namespace {

void write_output(const std::string& path, const std::string& data) {
    if (path.empty() || path == "-") {
        std::cout << data;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw riff::ValidationError("io_error", "cannot write " + path);
    out << data;
}

std::pair<std::string, std::uint16_t> split_host_port(const std::string& addr) {
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos) throw riff::ValidationError("invalid_argument", "expected host:port, got " + addr);
    const std::string host = addr.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(addr.substr(colon + 1));
    } catch (const std::exception&) {
        port = -1;
    }
    if (port < 0 || port > 65535) throw riff::ValidationError("invalid_argument", "bad port in " + addr);
    return {host.empty() ? "127.0.0.1" : host, static_cast<std::uint16_t>(port)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conversation analytics, Meeting Mediator server and cohort study reports"};
    app.require_subcommand(1);

    // report
    auto* report = app.add_subcommand("report", "Correlation and odds-ratio tables from a cohort CSV");
    std::string report_input, report_out, predictor = "total", cohort = "completers", format = "table",
                                          plot_outcome = "certificate";
    double alpha = 0.05, pass_mark = 70.0;
    report->add_option("--input", report_input, "Cohort CSV")->required();
    report->add_option("--predictor", predictor, "total | first4wk")->check(CLI::IsMember({"total", "first4wk"}));
    report->add_option("--cohort", cohort, "completers | all")->check(CLI::IsMember({"completers", "all"}));
    report->add_option("--alpha", alpha, "Family-wise error rate");
    report->add_option("--pass-mark", pass_mark, "Final grade counted as a pass");
    report->add_option("--format", format, "table | json | svg")->check(CLI::IsMember({"table", "json", "svg"}));
    report->add_option("--plot-outcome", plot_outcome, "certificate | passed")
        ->check(CLI::IsMember({"certificate", "passed"}));
    report->add_option("--out", report_out, "Output path (default stdout)");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic meeting event log");
    std::size_t participants = 4;
    double duration_s = 600;
    std::uint64_t sim_seed = 42;
    std::string mm = "off", profile = "balanced", sim_out, sim_meeting = "sim";
    simulate->add_option("--participants", participants)->check(CLI::Range(2, 16));
    simulate->add_option("--duration-s", duration_s)->check(CLI::PositiveNumber);
    simulate->add_option("--seed", sim_seed);
    simulate->add_option("--mm", mm, "on | off")->check(CLI::IsMember({"on", "off"}));
    simulate->add_option("--profile", profile, "balanced | dominant | <profiles.json>");
    simulate->add_option("--meeting", sim_meeting);
    simulate->add_option("--out", sim_out);

    // experiment
    auto* experiment = app.add_subcommand("experiment", "On/Off Meeting Mediator factorial over two tasks");
    std::string design = "table5", exp_profile = "dominant", exp_out;
    std::size_t groups_per_cell = 25, exp_participants = 4;
    std::uint64_t exp_seed = 7;
    double task_duration_s = 600;
    experiment->add_option("--design", design)->check(CLI::IsMember({"table5"}));
    experiment->add_option("--groups-per-cell", groups_per_cell)->check(CLI::PositiveNumber);
    experiment->add_option("--seed", exp_seed);
    experiment->add_option("--participants", exp_participants)->check(CLI::Range(2, 16));
    experiment->add_option("--task-duration-s", task_duration_s)->check(CLI::PositiveNumber);
    experiment->add_option("--profile", exp_profile, "balanced | dominant | <profiles.json>");
    experiment->add_option("--out", exp_out);

    // synth-cohort
    auto* synth = app.add_subcommand("synth-cohort", "Synthetic cohort with a known odds ratio");
    riff::sim::CohortGenParams gen;
    std::string synth_out;
    synth->add_option("--n", gen.n_students)->check(CLI::PositiveNumber);
    synth->add_option("--beta0", gen.beta0);
    synth->add_option("--beta1", gen.beta1, "Log-odds of a certificate per early call");
    synth->add_option("--grade-slope", gen.grade_slope);
    synth->add_option("--noise-sd", gen.noise_sd);
    synth->add_option("--dropout", gen.dropout_fraction);
    synth->add_option("--pass-mark", gen.pass_mark);
    synth->add_option("--seed", gen.seed);
    synth->add_option("--out", synth_out);

    // serve
    auto* serve = app.add_subcommand("serve", "Run the meeting hub");
    std::string listen = "127.0.0.1:7600", data_dir = "data", clock = "wall";
    riff::ServerConfig server_config;
    serve->add_option("--listen", listen, "host:port");
    serve->add_option("--tick-ms", server_config.hub.mediator.tick_ms);
    serve->add_option("--window-ms", server_config.hub.mediator.window_ms);
    serve->add_option("--data-dir", data_dir);
    serve->add_option("--time-scale", server_config.time_scale)->check(CLI::PositiveNumber);
    serve->add_option("--clock", clock, "wall | event")->check(CLI::IsMember({"wall", "event"}));

    // replay
    auto* replay = app.add_subcommand("replay", "Stream an event log through a server or an in-process hub");
    std::string replay_input, connect, replay_meeting, snapshots_out, metrics_out;
    riff::ReplayOptions replay_options;
    riff::HubConfig replay_hub;
    Millis lead_ms = -1;
    replay->add_option("--input", replay_input, "Event log (JSONL)")->required();
    replay->add_option("--connect", connect, "host:port of a running server (default: in-process)");
    replay->add_option("--meeting", replay_meeting);
    replay->add_option("--started-at", replay_options.started_at);
    replay->add_option("--tick-ms", replay_hub.mediator.tick_ms);
    replay->add_option("--window-ms", replay_hub.mediator.window_ms);
    replay->add_option("--lead-ms", lead_ms, "Send events at most this far ahead of the server clock");
    replay->add_option("--out", snapshots_out, "mm frames (JSONL)");
    replay->add_option("--metrics-out", metrics_out);

    // aggregate
    auto* aggregate = app.add_subcommand("aggregate", "Post-meeting metrics for an event log");
    std::string agg_input, agg_out, agg_roster;
    riff::AggregateOptions agg_options;
    aggregate->add_option("--input", agg_input)->required();
    aggregate->add_option("--roster", agg_roster, "Comma-separated participant order");
    aggregate->add_option("--started-at", agg_options.started_at);
    aggregate->add_option("--out", agg_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*report) {
            riff::AnalysisOptions options;
            options.predictor = riff::predictor_from_string(predictor);
            options.filter = riff::cohort_filter_from_string(cohort);
            options.alpha = alpha;
            options.pass_mark = pass_mark;
            options.plot_outcome = plot_outcome;
            const auto result = riff::analyze(riff::load_cohort(report_input), options);
            const std::string text = format == "json"  ? riff::render_json(result)
                                     : format == "svg" ? riff::render_svg(result)
                                                       : riff::render_table(result);
            write_output(report_out, text);
        } else if (*simulate) {
            riff::sim::SimulationOptions options;
            options.meeting_id = sim_meeting;
            options.duration_ms = static_cast<Millis>(std::llround(duration_s * 1000.0));
            options.mm_on = mm == "on";
            options.seed = sim_seed;
            const auto result =
                riff::sim::simulate_meeting(riff::sim::load_profiles(profile, participants), options);
            write_output(sim_out, riff::sim::events_to_jsonl(result.events));
        } else if (*experiment) {
            riff::sim::ExperimentDesign d;
            d.groups_per_cell = groups_per_cell;
            d.seed = exp_seed;
            d.task_duration_ms = static_cast<Millis>(std::llround(task_duration_s * 1000.0));
            const auto rows =
                riff::sim::run_ab_experiment(d, riff::sim::load_profiles(exp_profile, exp_participants));
            write_output(exp_out, riff::sim::experiment_to_csv(rows));
        } else if (*synth) {
            write_output(synth_out, riff::write_cohort_csv(riff::sim::synth_cohort(gen)));
        } else if (*serve) {
            auto [host, port] = split_host_port(listen);
            server_config.host = host;
            server_config.port = port;
            server_config.hub.data_dir = data_dir;
            server_config.event_clock = clock == "event";
            riff::Server server(server_config);
            const auto bound = server.start();
            std::fprintf(stderr, "listening on %s:%u (ws path /ws), data in %s\n", host.c_str(), bound,
                         data_dir.c_str());
            server.wait();
        } else if (*replay) {
            auto events = riff::read_event_log(replay_input);
            replay_options.meeting_id = replay_meeting;
            replay_options.tick_ms = replay_hub.mediator.tick_ms;
            if (lead_ms >= 0) replay_options.lead_ms = lead_ms;
            riff::ReplayResult result;
            if (connect.empty()) {
                result = riff::replay_offline(std::move(events), replay_hub, replay_options);
            } else {
                auto [host, port] = split_host_port(connect);
                result = riff::replay_to_server(host, port, std::move(events), replay_options);
            }
            std::string frames;
            for (const auto& s : result.snapshots) frames += s + "\n";
            if (!snapshots_out.empty()) write_output(snapshots_out, frames);
            if (!metrics_out.empty() || snapshots_out.empty()) write_output(metrics_out, result.metrics_doc);
        } else if (*aggregate) {
            const auto events = riff::read_event_log(agg_input);
            std::stringstream ss(agg_roster);
            for (std::string id; std::getline(ss, id, ',');)
                if (!id.empty()) agg_options.roster.push_back(id);
            write_output(agg_out, riff::metrics_to_json(riff::aggregate_meeting(events, agg_options)));
        }
    } catch (const riff::DegenerateError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const riff::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
