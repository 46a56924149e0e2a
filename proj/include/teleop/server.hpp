#pragma once

// WebSocket service. One simulation thread owns the Engine; one network
// thread runs the io_context and owns every connection. They talk only
// through the inbox (network -> sim) and posted closures (sim -> network),
// so a slow client never stalls a tick: its bounded outbound queue drops
// messages and the next delivered message is a gap_notice control.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "teleop/session.hpp"
#include "teleop/wire.hpp"

namespace teleop::server {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

struct ServerOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 8765;       // 0 picks a free port
  std::size_t outbound_limit = 256;  // queued messages per connection
  std::optional<double> pace_ms;   // wall-clock tick period; defaults to the scenario tick
  std::optional<std::uint64_t> max_ticks;
  int send_buffer_bytes = 0;       // SO_SNDBUF for accepted sockets; 0 keeps the OS default
};

enum class StopReason { Fallen, Shutdown, MaxTicks };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::Fallen: return "fallen";
    case StopReason::Shutdown: return "shutdown";
    case StopReason::MaxTicks: return "max_ticks";
  }
  return "?";
}

/// Static map description sent in the hello control message.
inline json map_json(const scenario::Scenario& sc) {
  json rows = json::array();
  const auto& g = sc.grid;
  for (int y = g.height() - 1; y >= 0; --y) {
    std::string row;
    for (int x = 0; x < g.width(); ++x) {
      switch (g.at({x, y})) {
        case world::Cell::Free: row.push_back('.'); break;
        case world::Cell::Obstacle: row.push_back('#'); break;
        case world::Cell::Pit: row.push_back('O'); break;
        case world::Cell::WhiteLine: row.push_back('='); break;
        case world::Cell::Beacon: row.push_back('B'); break;
      }
    }
    rows.push_back(row);
  }
  return {{"cell_size", g.cell_size()}, {"rows", rows}};
}

class Server;

class Connection : public std::enable_shared_from_this<Connection> {
public:
  Connection(tcp::socket socket, std::uint64_t id, Server& server)
      : ws_(std::move(socket)), id_(id), server_(server) {}

  void start();
  std::uint64_t id() const { return id_; }

  // The members below run on the network thread only.
  void send(wire::MessageType type, json payload);
  void close();

private:
  void on_accept(beast::error_code ec);
  void do_read();
  void on_read(beast::error_code ec, std::size_t);
  void do_write();
  void on_write(beast::error_code ec, std::size_t);
  void reject(const std::string& code, const std::string& message, std::optional<std::uint64_t> ref);

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::uint64_t id_;
  Server& server_;
  wire::Sequencer out_seq_;
  wire::SeqGuard in_guard_;
  std::deque<std::string> queue_;
  bool writing_ = false;
  bool open_ = false;
  bool closing_ = false;
  std::uint64_t dropped_ = 0;
  std::uint64_t first_dropped_seq_ = 0;
};

class Server {
public:
  struct Inbound {
    std::uint64_t connection;
    wire::WireMessage message;
  };

  Server(session::Engine& engine, ServerOptions options)
      : engine_(engine), options_(std::move(options)), acceptor_(ioc_) {
    tcp::endpoint ep{net::ip::make_address(options_.host), options_.port};
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
    hello_ = {{"event", "hello"},
              {"schema", wire::kSchemaVersion},
              {"tick_ms", engine_.scenario().tick_ms},
              {"map", map_json(engine_.scenario())}};
  }

  ~Server() {
    request_stop();
    if (net_thread_.joinable()) net_thread_.join();
  }

  std::uint16_t port() const { return acceptor_.local_endpoint().port(); }

  /// Runs the tick loop on the calling thread until a stop condition.
  StopReason run() {
    net_thread_ = std::thread([this] {
      do_accept();
      ioc_.run();
    });
    const auto period = std::chrono::duration<double, std::milli>(
        options_.pace_ms.value_or(engine_.scenario().tick_ms));
    auto deadline = std::chrono::steady_clock::now();
    StopReason reason = StopReason::Shutdown;
    while (true) {
      deadline += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
      {
        std::unique_lock lock(mutex_);
        wake_.wait_until(lock, deadline, [this] { return stop_requested_; });
        if (stop_requested_) break;
      }
      for (auto& in : drain()) handle(in);
      if (shutdown_requested_) break;
      json rec = engine_.step();
      broadcast(wire::MessageType::Telemetry, std::move(rec));
      if (engine_.fallen()) {
        reason = StopReason::Fallen;
        break;
      }
      if (options_.max_ticks && engine_.tick() >= *options_.max_ticks) {
        reason = StopReason::MaxTicks;
        break;
      }
    }
    spdlog::info("stopping after {} ticks: {}", engine_.tick(), to_string(reason));
    broadcast(wire::MessageType::Control, {{"event", "stopping"}, {"reason", to_string(reason)}});
    net::post(ioc_, [this] {
      beast::error_code ignored;
      acceptor_.close(ignored);
      for (auto& [id, c] : connections_) c->close();
    });
    net_thread_.join();
    return reason;
  }

  /// Thread-safe; makes run() return at the next tick boundary.
  void request_stop() {
    {
      std::lock_guard lock(mutex_);
      stop_requested_ = true;
    }
    wake_.notify_all();
  }

  // Network-thread side.
  void push_inbound(std::uint64_t connection, wire::WireMessage m) {
    std::lock_guard lock(mutex_);
    inbox_.push_back({connection, std::move(m)});
  }
  void on_open(const std::shared_ptr<Connection>& c) {
    connections_[c->id()] = c;
    c->send(wire::MessageType::Control, hello_);
    spdlog::info("connection {} open", c->id());
  }
  void on_closed(std::uint64_t id) {
    if (connections_.erase(id) == 0) return;
    spdlog::info("connection {} closed", id);
    std::lock_guard lock(mutex_);
    closed_.push_back(id);
  }
  std::size_t outbound_limit() const { return options_.outbound_limit; }

private:
  void do_accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      if (options_.send_buffer_bytes > 0) {
        beast::error_code ignored;
        socket.set_option(net::socket_base::send_buffer_size(options_.send_buffer_bytes), ignored);
      }
      std::make_shared<Connection>(std::move(socket), ++next_id_, *this)->start();
      do_accept();
    });
  }

  std::vector<Inbound> drain() {
    std::vector<Inbound> out;
    std::vector<std::uint64_t> closed;
    {
      std::lock_guard lock(mutex_);
      out.swap(inbox_);
      closed.swap(closed_);
    }
    for (auto id : closed) {
      for (const auto& e : engine_.close_stream(id)) send_to(id, wire::MessageType::DigitEvent, session::digit_event_json(e));
    }
    return out;
  }

  void handle(const Inbound& in) {
    const auto& m = in.message;
    auto error = [&](const std::string& code, const std::string& msg) {
      send_to(in.connection, wire::MessageType::Error, {{"code", code}, {"message", msg}, {"ref_seq", m.seq}});
    };
    switch (m.type) {
      case wire::MessageType::AudioChunk: {
        wire::AudioChunk chunk;
        try {
          chunk = wire::parse_audio(m.payload);
        } catch (const wire::WireError& e) {
          return error("bad_payload", e.what());
        }
        if (chunk.pcm.size() % 2 != 0) return error("odd_length", "PCM chunk has an odd byte count; dropped");
        try {
          for (const auto& e : engine_.ingest_audio(chunk.pcm, chunk.sample_rate, in.connection))
            send_to(in.connection, wire::MessageType::DigitEvent, session::digit_event_json(e));
        } catch (const std::invalid_argument& e) {
          return error("bad_payload", e.what());
        }
        return;
      }
      case wire::MessageType::SircTrain: {
        try {
          const auto frame = engine_.ingest_sirc(wire::parse_sirc(m.payload));
          spdlog::debug("sirc cmd={} addr={}", frame.command(), frame.address());
        } catch (const sirc::DecodeError& e) {
          return error("decode_error", e.what());
        } catch (const std::exception& e) {
          return error("bad_payload", e.what());
        }
        return;
      }
      case wire::MessageType::Control: {
        const auto cmd = m.payload.value("command", std::string());
        if (cmd == "shutdown") {
          shutdown_requested_ = true;
          return;
        }
        return error("bad_payload", "unknown control command '" + cmd + "'");
      }
      default:
        return error("unsupported", std::string(wire::to_string(m.type)) + " is not accepted from clients");
    }
  }

  void send_to(std::uint64_t id, wire::MessageType type, json payload) {
    net::post(ioc_, [this, id, type, payload = std::move(payload)]() mutable {
      if (auto it = connections_.find(id); it != connections_.end()) it->second->send(type, std::move(payload));
    });
  }

  void broadcast(wire::MessageType type, json payload) {
    net::post(ioc_, [this, type, payload = std::move(payload)] {
      for (auto& [id, c] : connections_) c->send(type, payload);
    });
  }

  session::Engine& engine_;
  ServerOptions options_;
  net::io_context ioc_{1};
  tcp::acceptor acceptor_;
  std::thread net_thread_;
  json hello_;

  std::map<std::uint64_t, std::shared_ptr<Connection>> connections_;  // network thread
  std::uint64_t next_id_ = 0;

  std::mutex mutex_;
  std::condition_variable wake_;
  std::vector<Inbound> inbox_;
  std::vector<std::uint64_t> closed_;
  bool stop_requested_ = false;
  bool shutdown_requested_ = false;  // sim thread
};

inline void Connection::start() {
  beast::get_lowest_layer(ws_).expires_never();
  auto timeouts = websocket::stream_base::timeout::suggested(beast::role_type::server);
  timeouts.handshake_timeout = std::chrono::seconds(2);
  ws_.set_option(timeouts);
  ws_.async_accept(beast::bind_front_handler(&Connection::on_accept, shared_from_this()));
}

inline void Connection::on_accept(beast::error_code ec) {
  if (ec) return spdlog::warn("websocket handshake failed: {}", ec.message());
  ws_.text(true);
  open_ = true;
  server_.on_open(shared_from_this());
  do_read();
}

inline void Connection::do_read() {
  ws_.async_read(buffer_, beast::bind_front_handler(&Connection::on_read, shared_from_this()));
}

inline void Connection::on_read(beast::error_code ec, std::size_t) {
  if (ec) {
    open_ = false;
    server_.on_closed(id_);
    return;
  }
  const std::string text = beast::buffers_to_string(buffer_.data());
  buffer_.consume(buffer_.size());
  try {
    auto m = wire::WireMessage::parse(text);
    if (!in_guard_.accept(m.seq)) {
      reject("bad_seq", "seq must strictly increase", m.seq);
    } else {
      server_.push_inbound(id_, std::move(m));
    }
  } catch (const wire::WireError& e) {
    const std::string what = e.what();
    reject(what.rfind("unknown message type", 0) == 0 ? "unknown_type" : "bad_message", what, std::nullopt);
  }
  do_read();
}

inline void Connection::reject(const std::string& code, const std::string& message,
                               std::optional<std::uint64_t> ref) {
  json p{{"code", code}, {"message", message}};
  if (ref) p["ref_seq"] = *ref;
  send(wire::MessageType::Error, std::move(p));
}

inline void Connection::send(wire::MessageType type, json payload) {
  if (!open_ || closing_) return;
  // Control messages (hello, stopping) are never dropped.
  if (type != wire::MessageType::Control && queue_.size() >= server_.outbound_limit()) {
    // The dropped message still consumes a seq so the client sees the gap.
    const auto seq = out_seq_.next();
    if (dropped_++ == 0) first_dropped_seq_ = seq;
    return;
  }
  if (dropped_ > 0) {
    json notice{{"event", "gap_notice"},
                {"dropped", dropped_},
                {"first_seq", first_dropped_seq_},
                {"last_seq", out_seq_.last()}};
    queue_.push_back(wire::WireMessage{wire::MessageType::Control, out_seq_.next(), std::move(notice)}.serialize());
    dropped_ = 0;
  }
  queue_.push_back(wire::WireMessage{type, out_seq_.next(), std::move(payload)}.serialize());
  if (!writing_) do_write();
}

inline void Connection::do_write() {
  writing_ = true;
  ws_.async_write(net::buffer(queue_.front()), beast::bind_front_handler(&Connection::on_write, shared_from_this()));
}

inline void Connection::on_write(beast::error_code ec, std::size_t) {
  writing_ = false;
  if (ec) {
    open_ = false;
    queue_.clear();
    server_.on_closed(id_);
    return;
  }
  queue_.pop_front();
  if (!queue_.empty()) return do_write();
  if (closing_ && open_) {
    open_ = false;
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }
}

inline void Connection::close() {
  if (!open_ || closing_) return;
  closing_ = true;
  if (!writing_) {
    open_ = false;
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }
}

}  // namespace teleop::server
