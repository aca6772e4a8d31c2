#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <set>
#include <string>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "biohand/teleop_messages.hpp"

namespace biohand {

namespace teleop_detail {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace ws = beast::websocket;
using tcp = asio::ip::tcp;

class Hub;

/// One WebSocket client. Lives on the network thread only. Keeps at most one
/// pending state frame: a client that reads slowly skips frames.
class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, Hub& hub) : stream_(std::move(socket)), hub_(hub) {}

  void start() {
    http::async_read(stream_.next_layer(), buffer_, request_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
  }

  void send_state(std::shared_ptr<const std::string> frame) {
    if (!open_) return;
    pending_state_ = std::move(frame);
    flush();
  }

  void send_error(std::string text) {
    if (!open_) return;
    if (errors_.size() < 16) errors_.push_back(std::make_shared<const std::string>(std::move(text)));
    flush();
  }

  void close() {
    if (!open_) return;
    open_ = false;
    beast::error_code ec;
    stream_.next_layer().shutdown(tcp::socket::shutdown_both, ec);
    stream_.next_layer().close(ec);
  }

 private:
  void on_request(beast::error_code ec);
  void read();
  void flush();

  ws::stream<tcp::socket> stream_;
  Hub& hub_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
  std::deque<std::shared_ptr<const std::string>> errors_;
  std::shared_ptr<const std::string> pending_state_;
  std::shared_ptr<const std::string> in_flight_;
  bool writing_ = false;
  bool open_ = false;
};

/// Accepts connections and fans state frames out to every open session.
class Hub {
 public:
  Hub(asio::io_context& io, TeleopLoop& loop, const std::string& host, unsigned short port,
      std::filesystem::path static_root = {})
      : io_(io), loop_(loop), acceptor_(io), static_root_(std::move(static_root)) {
    const tcp::endpoint ep(asio::ip::make_address(host), port);
    beast::error_code ec;
    acceptor_.open(ep.protocol(), ec);
    if (!ec) acceptor_.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(ep, ec);
    if (!ec) acceptor_.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) throw std::runtime_error("teleop: cannot listen on " + host + ":" + std::to_string(port) + ": " + ec.message());
    port_ = acceptor_.local_endpoint().port();
  }

  void start() { accept(); }

  [[nodiscard]] unsigned short port() const { return port_; }

  /// Thread-safe: called from the control loop.
  void publish(std::string frame) {
    auto shared = std::make_shared<const std::string>(std::move(frame));
    asio::post(io_, [this, shared] {
      for (const auto& s : sessions_) s->send_state(shared);
    });
  }

  void stop() {
    asio::post(io_, [this] {
      beast::error_code ec;
      acceptor_.close(ec);
      for (const auto& s : sessions_) s->close();
      sessions_.clear();
    });
  }

  void add(const std::shared_ptr<Session>& s) { sessions_.insert(s); }
  void remove(const std::shared_ptr<Session>& s) { sessions_.erase(s); }
  TeleopLoop& loop() { return loop_; }
  [[nodiscard]] std::size_t clients() const { return sessions_.size(); }

  /// File under the static root for a GET target, if serving is on and the
  /// target stays inside the root.
  [[nodiscard]] std::optional<std::filesystem::path> static_file(std::string_view target) const {
    if (static_root_.empty()) return std::nullopt;
    std::string rel(target.substr(0, target.find('?')));
    if (rel.empty() || rel == "/") rel = "/index.html";
    if (rel.find("..") != std::string::npos) return std::nullopt;
    const std::filesystem::path p = static_root_ / rel.substr(1);
    if (!std::filesystem::is_regular_file(p)) return std::nullopt;
    return p;
  }

 private:
  void accept() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      std::make_shared<Session>(std::move(socket), *this)->start();
      accept();
    });
  }

  asio::io_context& io_;
  TeleopLoop& loop_;
  tcp::acceptor acceptor_;
  unsigned short port_ = 0;
  std::set<std::shared_ptr<Session>> sessions_;
  std::filesystem::path static_root_;
};

inline const char* content_type(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".html") return "text/html; charset=utf-8";
  if (ext == ".js") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".csv") return "text/csv";
  return "application/octet-stream";
}

inline void Session::on_request(beast::error_code ec) {
  if (ec) return;
  if (!ws::is_upgrade(request_) || request_.target() != "/teleop") {
    auto res = std::make_shared<http::response<http::string_body>>(http::status::not_found, request_.version());
    const auto file = request_.method() == http::verb::get && !ws::is_upgrade(request_)
                          ? hub_.static_file(std::string_view(request_.target().data(), request_.target().size()))
                          : std::nullopt;
    if (file) {
      std::ifstream in(*file, std::ios::binary);
      std::ostringstream body;
      body << in.rdbuf();
      res->result(http::status::ok);
      res->set(http::field::content_type, content_type(*file));
      res->body() = body.str();
    } else {
      res->set(http::field::content_type, "text/plain");
      res->body() = "websocket endpoint is /teleop\n";
    }
    res->keep_alive(false);
    res->prepare_payload();
    http::async_write(stream_.next_layer(), *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->stream_.next_layer().shutdown(tcp::socket::shutdown_both, ignored);
    });
    return;
  }
  stream_.text(true);
  stream_.async_accept(request_, [self = shared_from_this()](beast::error_code ec2) {
    if (ec2) return;
    self->open_ = true;
    self->hub_.add(self);
    self->read();
  });
}

inline void Session::read() {
  stream_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->open_ = false;
      self->hub_.remove(self);
      return;
    }
    const std::string text = beast::buffers_to_string(self->buffer_.data());
    self->buffer_.consume(self->buffer_.size());
    try {
      self->hub_.loop().post(decode_command(text));
    } catch (const ProtocolError& e) {
      self->send_error(encode_error(e.what()));
    }
    self->read();
  });
}

inline void Session::flush() {
  if (writing_ || !open_) return;
  if (!errors_.empty()) {
    in_flight_ = errors_.front();
    errors_.pop_front();
  } else if (pending_state_) {
    in_flight_ = std::move(pending_state_);
    pending_state_.reset();
  } else {
    return;
  }
  writing_ = true;
  stream_.async_write(asio::buffer(*in_flight_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
    self->writing_ = false;
    self->in_flight_.reset();
    if (ec) {
      self->open_ = false;
      self->hub_.remove(self);
      return;
    }
    self->flush();
  });
}

}  // namespace teleop_detail

/// Live teleoperation: the control loop runs on the calling thread at the
/// scenario's control period; WebSocket clients on /teleop receive state at
/// `broadcast_rate` and send commands. Binding happens in the constructor, so
/// a busy port fails there.
class TeleopServer {
 public:
  /// A non-empty `static_root` also serves plain GET requests from that
  /// directory (the browser panel).
  TeleopServer(const Scenario& sc, unsigned short port, double broadcast_rate = 30.0,
               const std::string& host = "127.0.0.1", std::filesystem::path static_root = {})
      : loop_(sc, broadcast_rate), hub_(io_, loop_, host, port, std::move(static_root)) {}

  ~TeleopServer() { shutdown(); }

  [[nodiscard]] unsigned short port() const { return hub_.port(); }
  [[nodiscard]] long ticks() const { return ticks_.load(); }
  [[nodiscard]] const TeleopLoop& loop() const { return loop_; }

  /// Runs until `stop` becomes true. `realtime` paces ticks to the control
  /// period; otherwise the loop free-runs.
  void run(const std::atomic<bool>& stop, bool realtime = true) {
    hub_.start();
    network_ = std::thread([this] { io_.run(); });
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(loop_.control_period()));
    auto next = clock::now();
    while (!stop.load()) {
      if (auto state = loop_.tick()) hub_.publish(encode_state(*state));
      ticks_.store(loop_.ticks());
      if (realtime) {
        next += period;
        const auto now = clock::now();
        if (next < now) next = now;  // overrun: no catch-up burst
        std::this_thread::sleep_until(next);
      }
    }
    shutdown();
  }

 private:
  void shutdown() {
    if (!network_.joinable()) return;
    hub_.stop();
    boost::asio::post(io_, [this] { io_.stop(); });  // runs after the close handler above
    network_.join();
  }

  boost::asio::io_context io_{1};
  TeleopLoop loop_;
  teleop_detail::Hub hub_;
  std::thread network_;
  std::atomic<long> ticks_{0};
};

}  // namespace biohand
