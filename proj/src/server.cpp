#include "riff/server.hpp"

#include <sys/socket.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <future>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "riff/error.hpp"

namespace riff {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) fn(line);
        pos = nl + 1;
    }
}

class WsConnection : public std::enable_shared_from_this<WsConnection> {
public:
    WsConnection(tcp::socket socket, MeetingHub& hub) : ws_(std::move(socket)), hub_(hub) {}

    void start(http::request<http::string_body> req) {
        outbox_ = std::make_shared<Outbox>();
        std::weak_ptr<WsConnection> weak = shared_from_this();
        auto exec = ws_.get_executor();
        outbox_->set_notify([weak, exec] {
            net::post(exec, [weak] {
                if (auto self = weak.lock()) self->pump();
            });
        });
        ws_.text(true);
        ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
            if (!ec) self->read();
        });
    }

private:
    void read() {
        ws_.async_read(rbuf_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return;
            const auto text = beast::buffers_to_string(self->rbuf_.data());
            self->rbuf_.consume(self->rbuf_.size());
            for_each_line(text, [&](std::string_view line) { self->hub_.handle(line, self->outbox_); });
            self->read();
        });
    }

    void pump() {
        if (writing_) return;
        if (queue_.empty())
            for (auto& f : outbox_->drain()) queue_.push_back(std::move(f));
        if (queue_.empty()) return;
        writing_ = true;
        ws_.async_write(net::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            self->writing_ = false;
            self->queue_.pop_front();
            if (!ec) self->pump();
        });
    }

    websocket::stream<tcp::socket> ws_;
    MeetingHub& hub_;
    std::shared_ptr<Outbox> outbox_;
    beast::flat_buffer rbuf_;
    std::deque<std::string> queue_;
    bool writing_ = false;
};

class LineConnection : public std::enable_shared_from_this<LineConnection> {
public:
    LineConnection(tcp::socket socket, MeetingHub& hub) : socket_(std::move(socket)), hub_(hub) {}

    void start() { read(true); }

private:
    void read(bool first) {
        net::async_read_until(socket_, net::dynamic_buffer(buffer_), '\n',
                              [self = shared_from_this(), first](beast::error_code ec, std::size_t n) {
                                  if (ec) return;
                                  if (first && self->buffer_.rfind("GET ", 0) == 0) return self->upgrade();
                                  if (first) self->attach();
                                  const std::string chunk = self->buffer_.substr(0, n);
                                  self->buffer_.erase(0, n);
                                  for_each_line(chunk, [&](std::string_view line) { self->hub_.handle(line, self->outbox_); });
                                  self->read(false);
                              });
    }

    void attach() {
        outbox_ = std::make_shared<Outbox>();
        std::weak_ptr<LineConnection> weak = shared_from_this();
        auto exec = socket_.get_executor();
        outbox_->set_notify([weak, exec] {
            net::post(exec, [weak] {
                if (auto self = weak.lock()) self->pump();
            });
        });
    }

    void upgrade() {
        auto n = buffer_.size();
        auto dst = hbuf_.prepare(n);
        net::buffer_copy(dst, net::buffer(buffer_));
        hbuf_.commit(n);
        buffer_.clear();
        http::async_read(socket_, hbuf_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return;
            if (!websocket::is_upgrade(self->req_) || self->req_.target() != "/ws") {
                auto res = std::make_shared<http::response<http::string_body>>(http::status::not_found,
                                                                              self->req_.version());
                res->set(http::field::content_type, "text/plain");
                res->body() = "websocket endpoint is /ws\n";
                res->prepare_payload();
                http::async_write(self->socket_, *res, [self, res](beast::error_code, std::size_t) {
                    beast::error_code ignored;
                    self->socket_.shutdown(tcp::socket::shutdown_both, ignored);
                });
                return;
            }
            std::make_shared<WsConnection>(std::move(self->socket_), self->hub_)->start(std::move(self->req_));
        });
    }

    void pump() {
        if (writing_) return;
        auto frames = outbox_->drain();
        if (frames.empty()) return;
        wbuf_.clear();
        for (auto& f : frames) {
            wbuf_ += f;
            wbuf_ += '\n';
        }
        writing_ = true;
        net::async_write(socket_, net::buffer(wbuf_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            self->writing_ = false;
            if (!ec) self->pump();
        });
    }

    tcp::socket socket_;
    MeetingHub& hub_;
    std::shared_ptr<Outbox> outbox_;
    std::string buffer_;
    std::string wbuf_;
    bool writing_ = false;
    beast::flat_buffer hbuf_;
    http::request<http::string_body> req_;
};

}  // namespace

struct Server::Impl {
    net::io_context io;
    tcp::acceptor acceptor{io};
    net::steady_timer timer{io};
    std::thread thread;
    std::chrono::microseconds period{1000};
    std::atomic<bool> running{false};

    void accept(MeetingHub& hub) {
        acceptor.async_accept([this, &hub](beast::error_code ec, tcp::socket socket) {
            if (ec) return;
            socket.set_option(tcp::no_delay(true));
            std::make_shared<LineConnection>(std::move(socket), hub)->start();
            accept(hub);
        });
    }

    void tick(MeetingHub& hub, double scale) {
        timer.expires_after(period);
        timer.async_wait([this, &hub, scale](beast::error_code ec) {
            if (ec) return;
            hub.advance_wall(scale);
            tick(hub, scale);
        });
    }
};

Server::Server(ServerConfig config) : config_(std::move(config)), hub_(config_.hub), impl_(std::make_unique<Impl>()) {
    if (!(config_.time_scale > 0.0)) throw ValidationError("invalid_argument", "time scale must be > 0");
    hub_.set_event_clock(config_.event_clock);
}

Server::~Server() { stop(); }

std::uint16_t Server::start() {
    const tcp::endpoint endpoint(net::ip::make_address(config_.host), config_.port);
    impl_->acceptor.open(endpoint.protocol());
    impl_->acceptor.set_option(net::socket_base::reuse_address(true));
    impl_->acceptor.bind(endpoint);
    impl_->acceptor.listen();
    port_ = impl_->acceptor.local_endpoint().port();
    impl_->accept(hub_);
    if (!config_.event_clock) {
        const double us = static_cast<double>(config_.hub.mediator.tick_ms) * 1000.0 / config_.time_scale / 4.0;
        impl_->period = std::chrono::microseconds(std::max<long long>(500, static_cast<long long>(us)));
        impl_->tick(hub_, config_.time_scale);
    }
    impl_->running = true;
    impl_->thread = std::thread([this] { impl_->io.run(); });
    return port_;
}

void Server::stop() {
    if (!impl_ || !impl_->running.exchange(false)) return;
    impl_->io.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

void Server::wait() {
    net::signal_set signals(impl_->io, SIGINT, SIGTERM);
    std::promise<void> done;
    signals.async_wait([&](beast::error_code, int) { done.set_value(); });
    done.get_future().wait();
    stop();
}

// ---------------------------------------------------------------------------

struct LineClient::Impl {
    net::io_context io;
    tcp::socket socket{io};
    std::thread reader;
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::string> lines;
    bool closed = false;
};

LineClient::LineClient(const std::string& host, std::uint16_t port) : impl_(std::make_unique<Impl>()) {
    tcp::resolver resolver(impl_->io);
    net::connect(impl_->socket, resolver.resolve(host, std::to_string(port)));
    impl_->socket.set_option(tcp::no_delay(true));
    impl_->reader = std::thread([impl = impl_.get()] {
        std::string buf;
        for (;;) {
            beast::error_code ec;
            const auto n = net::read_until(impl->socket, net::dynamic_buffer(buf), '\n', ec);
            if (ec) break;
            std::string line = buf.substr(0, n - 1);
            buf.erase(0, n);
            std::lock_guard lock(impl->mu);
            impl->lines.push_back(std::move(line));
            impl->cv.notify_all();
        }
        std::lock_guard lock(impl->mu);
        impl->closed = true;
        impl->cv.notify_all();
    });
}

LineClient::~LineClient() {
    close();
    if (impl_->reader.joinable()) impl_->reader.join();
}

void LineClient::send(const std::string& line) {
    const std::string data = line + "\n";
    const int fd = impl_->socket.native_handle();
    std::size_t off = 0;
    while (off < data.size()) {
        const auto n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error("io_error", "send failed");
        }
        off += static_cast<std::size_t>(n);
    }
}

std::optional<std::string> LineClient::read_line(std::chrono::milliseconds timeout) {
    std::unique_lock lock(impl_->mu);
    impl_->cv.wait_for(lock, timeout, [&] { return !impl_->lines.empty() || impl_->closed; });
    if (impl_->lines.empty()) return std::nullopt;
    auto line = std::move(impl_->lines.front());
    impl_->lines.pop_front();
    return line;
}

void LineClient::close() { ::shutdown(impl_->socket.native_handle(), SHUT_RDWR); }

}  // namespace riff
