#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "riff/hub.hpp"

namespace riff {

struct ServerConfig {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;  // 0: ephemeral
    HubConfig hub;
    double time_scale = 1.0;
    bool event_clock = false;  // tick on event timestamps instead of the wall clock
};

/// Line-delimited JSON over TCP. A connection whose first bytes are an HTTP
/// GET is upgraded to WebSocket (path /ws), one JSON object per text frame.
class Server {
public:
    explicit Server(ServerConfig config);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and starts the io thread. Returns the bound port.
    std::uint16_t start();
    void stop();
    /// Blocks until stop() is called from another thread or a signal arrives.
    void wait();

    std::uint16_t port() const { return port_; }
    MeetingHub& hub() { return hub_; }

private:
    struct Impl;

    ServerConfig config_;
    MeetingHub hub_;
    std::unique_ptr<Impl> impl_;
    std::uint16_t port_ = 0;
};

/// Blocking line client used by `replay` and the tests.
class LineClient {
public:
    LineClient(const std::string& host, std::uint16_t port);
    ~LineClient();

    void send(const std::string& line);
    /// Next line from the server, or nullopt on timeout / closed connection.
    std::optional<std::string> read_line(std::chrono::milliseconds timeout);
    void close();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace riff
