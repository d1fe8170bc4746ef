#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "riff/error.hpp"
#include "riff/hub.hpp"
#include "riff/server.hpp"
#include "riff/sim.hpp"

using namespace riff;
using nlohmann::json;

namespace {

std::string vad(const std::string& m, const std::string& p, Millis t, bool on) {
    return to_jsonl(VoiceActivityEvent{m, p, t, on});
}

std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("riff-test-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string code_of(const std::string& reply) {
    const auto j = json::parse(reply);
    return j.at("type") == "err" ? j.at("code").get<std::string>() : "";
}

}  // namespace

TEST_CASE("open, join, finalize lifecycle") {
    MeetingHub hub({});
    CHECK(code_of(hub.handle(R"({"type":"open","meeting":"m1","started_at":5})")).empty());
    CHECK(code_of(hub.handle(R"({"type":"open","meeting":"m1"})")) == "duplicate_meeting");
    for (const char* p : {"p1", "p2", "p3", "p4"})
        hub.handle(std::string(R"({"type":"join","meeting":"m1","participant":")") + p + "\"}");
    const auto again = json::parse(hub.handle(R"({"type":"join","meeting":"m1","participant":"p1"})"));
    CHECK(again.at("roster") == json({"p1", "p2", "p3", "p4"}));
    CHECK(again.at("layout").size() == 4);
    CHECK(hub.started_at("m1") == 5);

    const auto first = hub.finalize("m1");
    CHECK(hub.finalize("m1") == first);
    CHECK(hub.status("m1") == MeetingStatus::Finalized);
    CHECK(code_of(hub.handle(R"({"type":"join","meeting":"m1","participant":"p5"})")) == "meeting_finalized");
    CHECK(code_of(hub.handle(vad("m1", "p1", 10, true))) == "meeting_finalized");
    CHECK(code_of(hub.handle(R"({"type":"finalize","meeting":"nope"})")) == "unknown_meeting");
    CHECK(code_of(hub.handle(R"({"type":"open","meeting":""})")) == "invalid_id");

    // an empty meeting still yields a full document
    const auto m = metrics_from_json(first);
    CHECK(m.meeting_id == "m1");
    CHECK(m.participants.size() == 4);
    for (const auto& p : m.participants) CHECK(p.turn_count == 0);
    CHECK(m.events.empty());
    CHECK(m.duration_ms == 0);
}

TEST_CASE("bad frames are rejected without touching state") {
    MeetingHub hub({});
    hub.open("m1");
    hub.join("m1", "p1");
    CHECK(json::parse(hub.handle(vad("m1", "p1", 100, true))).at("seq") == 1);
    const std::pair<std::string, std::string> bad[] = {
        {vad("m2", "p1", 200, false), "unknown_meeting"},
        {vad("m1", "p9", 200, false), "unknown_participant"},
        {vad("m1", "p1", -1, false), "negative_timestamp"},
        {"{oops", "malformed_json"},
        {R"({"type":"vad","meeting":"m1","participant":"p1","t_ms":"x","speaking":true})", "malformed_frame"},
        {R"({"type":"dance","meeting":"m1"})", "unknown_type"},
        {"[1,2]", "malformed_frame"},
    };
    for (const auto& [line, code] : bad) CHECK(code_of(hub.handle(line)) == code);
    CHECK(hub.event_log("m1").size() == 1);
    const auto ack = json::parse(hub.handle(vad("m1", "p1", 900, false)));
    CHECK(ack.at("seq") == 2);
}

TEST_CASE("a 60 s meeting at 1 s ticks gives 60 snapshots") {
    MeetingHub hub({});
    std::vector<MediatorSnapshot> seen;
    hub.set_snapshot_listener([&](const MediatorSnapshot& s) { seen.push_back(s); });
    hub.open("m1");
    hub.join("m1", "p1");
    hub.join("m1", "p2");
    hub.ingest(vad("m1", "p1", 0, true));
    hub.ingest(vad("m1", "p1", 60000, false));
    for (Millis t = 250; t <= 60000; t += 250) hub.advance("m1", t);
    REQUIRE(seen.size() == 60);
    for (std::size_t k = 0; k < 60; ++k) CHECK(seen[k].t_ms == static_cast<Millis>(1000 * (k + 1)));
    // p1 becomes a turn once it has lasted 1 s
    CHECK(seen.front().turn_counts == std::vector<int>{1, 0});
}

TEST_CASE("one big jump equals many small steps") {
    const auto events = sim::simulate_meeting(sim::balanced_profiles(4), {}).events;
    auto run = [&](Millis step) {
        MeetingHub hub({});
        std::vector<MediatorSnapshot> seen;
        hub.set_snapshot_listener([&](const MediatorSnapshot& s) { seen.push_back(s); });
        hub.open("sim");
        for (const auto& p : {"p1", "p2", "p3", "p4"}) hub.join("sim", p);
        for (const auto& e : events) hub.ingest(e);
        for (Millis t = step; t < 600000 + step; t += step) hub.advance("sim", std::min<Millis>(t, 600000));
        return seen;
    };
    const auto fine = run(333);
    CHECK(fine.size() == 600);
    CHECK(run(600000) == fine);
}

TEST_CASE("late subscriber gets the current snapshot first") {
    MeetingHub hub({});
    hub.open("m1");
    hub.join("m1", "p1");
    hub.ingest(vad("m1", "p1", 0, true));
    hub.ingest(vad("m1", "p1", 5000, false));
    hub.advance("m1", 30000);
    auto box = std::make_shared<Outbox>();
    hub.handle(R"({"type":"join","meeting":"m1","participant":"p2"})", box);
    const auto frames = box->drain();
    REQUIRE(frames.size() == 2);
    const auto mm = json::parse(frames[0]);
    CHECK(mm.at("type") == "mm");
    CHECK(mm.at("t_ms") == 30000);
    CHECK(json::parse(frames[1]).at("type") == "ack");
}

TEST_CASE("outbox keeps only the newest snapshot per meeting") {
    Outbox box;
    for (int k = 0; k < 5; ++k) box.post_snapshot("a", std::make_shared<const std::string>("a" + std::to_string(k)));
    box.post_snapshot("b", std::make_shared<const std::string>("b0"));
    box.post_control("c0");
    box.post_control("c1");
    CHECK(box.drain() == std::vector<std::string>{"a4", "b0", "c0", "c1"});
    CHECK(box.dropped_snapshots() == 4);
    CHECK(box.drain().empty());
}

TEST_CASE("persisted log and metrics equal the accepted frames and their batch aggregate") {
    const auto dir = temp_dir("persist");
    HubConfig cfg;
    cfg.data_dir = dir.string();
    MeetingHub hub(cfg);
    hub.open("m1", 1700000000000);
    sim::SimulationOptions so;
    so.meeting_id = "m1";
    so.duration_ms = 120000;
    auto events = sim::simulate_meeting(sim::dominant_profiles(3), so).events;
    for (const auto& p : {"p3", "p1", "p2"}) hub.join("m1", p);
    // slight disorder on the wire is kept verbatim in the log
    for (std::size_t i = 1; i < events.size(); i += 5) std::swap(events[i - 1], events[i]);
    for (const auto& e : events) hub.ingest(to_jsonl(e));
    const auto doc = hub.finalize("m1");

    CHECK(hub.event_log("m1") == events);
    CHECK(read_event_log((dir / "m1.events.jsonl").string()) == events);
    CHECK(slurp(dir / "m1.metrics.json") == doc);
    AggregateOptions opt;
    opt.meeting_id = "m1";
    opt.roster = {"p3", "p1", "p2"};
    opt.started_at = 1700000000000;
    CHECK(metrics_to_json(aggregate_meeting(events, opt)) == doc);
    std::filesystem::remove_all(dir);
}

TEST_CASE("10k frames replayed: log equals input") {
    MeetingHub hub({});
    hub.open("big");
    std::vector<VoiceActivityEvent> in;
    std::mt19937_64 rng(51);
    std::uniform_int_distribution<int> who(1, 6);
    std::uniform_int_distribution<Millis> step(0, 400);
    Millis t = 0;
    for (int k = 0; k < 10000; ++k) {
        t += step(rng);
        in.push_back({"big", "p" + std::to_string(who(rng)), t, k % 2 == 0});
    }
    for (int p = 1; p <= 6; ++p) hub.join("big", "p" + std::to_string(p));
    for (const auto& e : in) hub.ingest(to_jsonl(e));
    CHECK(hub.event_log("big") == in);
}

TEST_CASE("interleaved meetings do not see each other") {
    const auto a = sim::simulate_meeting(sim::balanced_profiles(4), {}).events;
    sim::SimulationOptions ob;
    ob.meeting_id = "b";
    ob.seed = 9;
    const auto b = sim::simulate_meeting(sim::dominant_profiles(3), ob).events;

    auto run = [&](bool with_a) {
        MeetingHub hub({});
        std::vector<MediatorSnapshot> seen_b;
        hub.set_snapshot_listener([&](const MediatorSnapshot& s) {
            if (s.meeting_id == "b") seen_b.push_back(s);
        });
        hub.open("sim", 0);
        hub.open("b", 0);
        for (const auto& p : {"p1", "p2", "p3", "p4"}) hub.join("sim", p);
        for (const auto& p : {"p1", "p2", "p3"}) hub.join("b", p);
        std::size_t i = 0, j = 0;
        for (Millis now = 1000; now <= 600000; now += 1000) {
            for (; with_a && i < a.size() && a[i].t_ms <= now; ++i) hub.ingest(a[i]);
            for (; j < b.size() && b[j].t_ms <= now; ++j) hub.ingest(b[j]);
            if (with_a) hub.advance("sim", now);
            hub.advance("b", now);
        }
        return std::make_pair(seen_b, hub.finalize("b"));
    };
    const auto with = run(true), without = run(false);
    CHECK(with.first.size() == without.first.size());
    for (std::size_t k = 0; k < std::min(with.first.size(), without.first.size()); ++k)
        if (!(with.first[k] == without.first[k])) {
            MESSAGE("first difference at snapshot " << k << " t=" << with.first[k].t_ms);
            break;
        }
    CHECK(with.second == without.second);
}

TEST_CASE("line protocol and websocket against a live server") {
    ServerConfig cfg;
    cfg.time_scale = 100;
    Server server(cfg);
    const auto port = server.start();

    LineClient c("127.0.0.1", port);
    auto next = [&]() { return json::parse(c.read_line(std::chrono::seconds(5)).value()); };
    c.send(R"({"type":"open","meeting":"live","started_at":0})");
    CHECK(next().at("op") == "open");
    c.send(R"({"type":"join","meeting":"live","participant":"p1"})");
    json j;
    do j = next();
    while (j.at("type") == "mm");
    CHECK(j.at("op") == "join");

    namespace beast = boost::beast;
    namespace ws = beast::websocket;
    boost::asio::io_context ioc;
    boost::asio::ip::tcp::resolver resolver(ioc);
    ws::stream<boost::asio::ip::tcp::socket> stream(ioc);
    boost::asio::connect(stream.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    stream.handshake("127.0.0.1", "/ws");
    stream.text(true);
    stream.write(boost::asio::buffer(std::string(R"({"type":"join","meeting":"live","participant":"p2"})")));
    bool acked = false, saw_mm = false;
    for (int k = 0; k < 50 && !(acked && saw_mm); ++k) {
        beast::flat_buffer buf;
        stream.read(buf);
        const auto f = json::parse(beast::buffers_to_string(buf.data()));
        if (f.at("type") == "ack") {
            acked = true;
            CHECK(f.at("roster") == json({"p1", "p2"}));
        }
        saw_mm = saw_mm || f.at("type") == "mm";
    }
    CHECK(acked);
    CHECK(saw_mm);

    c.send(vad("live", "p1", 0, true));
    c.send(R"({"type":"finalize","meeting":"live"})");
    for (int k = 0; k < 200; ++k) {
        j = next();
        if (j.at("type") == "metrics") break;
    }
    CHECK(j.at("type") == "metrics");
    // the websocket subscriber is told too
    bool got_metrics = false;
    for (int k = 0; k < 200 && !got_metrics; ++k) {
        beast::flat_buffer buf;
        stream.read(buf);
        got_metrics = json::parse(beast::buffers_to_string(buf.data())).at("type") == "metrics";
    }
    CHECK(got_metrics);
    stream.close(ws::close_code::normal);

    // anything but /ws is refused
    boost::asio::ip::tcp::socket raw(ioc);
    boost::asio::connect(raw, resolver.resolve("127.0.0.1", std::to_string(port)));
    const std::string req = "GET /other HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n";
    boost::asio::write(raw, boost::asio::buffer(req));
    std::string resp;
    beast::error_code ec;
    char chunk[512];
    for (std::size_t n; (n = raw.read_some(boost::asio::buffer(chunk), ec)) > 0 || !ec;) resp.append(chunk, n);
    CHECK(resp.rfind("HTTP/1.1 404", 0) == 0);

    c.close();
    server.stop();
}
