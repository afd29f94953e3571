#pragma once

// WebSocket + HTTP front end for a live Engine.
//
//   ws://host:port/        JSON protocol (see protocol.hpp)
//   GET /scene             static scene description
//   GET /fluoro/<seq>.pgm  raster referenced by the latest fluoro_frame
//
// All network work runs on one io thread; the engine runs on its own thread
// and is reached only through Engine::submit_* and Engine::snapshot().

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <future>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "fracsim/fluoro.hpp"
#include "fracsim/protocol.hpp"
#include "fracsim/session.hpp"

namespace fracsim {

namespace service_detail {
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
}  // namespace service_detail

struct ServiceOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  double snapshot_hz = 60.0;
};

class ServiceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Service {
 public:
  Service(Engine& engine, ServiceOptions opt)
      : engine_(engine), opt_(std::move(opt)), acceptor_(ioc_), timer_(ioc_) {
    const Scene s = engine_.scene_copy();
    default_carm_ = default_carm(s);
    carm_ = default_carm_;
  }

  ~Service() { stop(); }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and starts serving; returns the bound port. Throws ServiceError if
  /// the address cannot be bound.
  unsigned short start();
  void stop();

  std::size_t client_count() const { return client_count_.load(); }

 private:
  class WsClient;
  class HttpConnection;
  friend class WsClient;
  friend class HttpConnection;

  void accept();
  void schedule_broadcast(std::chrono::steady_clock::time_point at);
  void broadcast(std::shared_ptr<const std::string> msg, bool droppable);
  void attach(const std::shared_ptr<WsClient>& c);
  void detach(std::uint64_t id);
  void on_message(WsClient& from, const std::string& text);
  void send_fluoro(WsClient* requester);
  service_detail::http::response<service_detail::http::string_body> http_response(
      const service_detail::http::request<service_detail::http::string_body>& req);

  Engine& engine_;
  ServiceOptions opt_;
  service_detail::net::io_context ioc_;
  service_detail::tcp::acceptor acceptor_;
  service_detail::net::steady_timer timer_;
  std::thread io_thread_;

  std::map<std::uint64_t, std::shared_ptr<WsClient>> clients_;
  std::uint64_t next_id_ = 1;
  std::uint64_t token_holder_ = 0;  // 0: nobody
  std::atomic<std::size_t> client_count_{0};

  CArmPose default_carm_;
  CArmPose carm_;
  std::uint64_t fluoro_seq_ = 0;
  std::string fluoro_pgm_;
};

// ---------------------------------------------------------------------------

class Service::WsClient : public std::enable_shared_from_this<Service::WsClient> {
 public:
  static constexpr std::size_t kMaxQueue = 64;

  WsClient(service_detail::tcp::socket&& socket, Service& svc, std::uint64_t id)
      : ws_(std::move(socket)), svc_(svc), id_(id) {}

  std::uint64_t id() const { return id_; }

  void start(service_detail::http::request<service_detail::http::string_body> req) {
    using namespace service_detail;
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(1 << 16);
    ws_.text(true);
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->svc_.attach(self);
      self->read();
    });
  }

  /// Queues a text frame. Droppable frames (snapshots) are skipped while the
  /// client is too far behind.
  void send(std::shared_ptr<const std::string> msg, bool droppable) {
    if (closed_) return;
    if (droppable && queue_.size() >= kMaxQueue) return;
    queue_.push_back(std::move(msg));
    if (queue_.size() == 1) write_next();
  }

  void send(const std::string& msg) { send(std::make_shared<const std::string>(msg), false); }

  void close() {
    service_detail::beast::error_code ec;
    service_detail::beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void read() {
    using namespace service_detail;
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      if (!self->ws_.got_text()) {
        self->send(protocol::fault_message(protocol::kMalformed, "binary frames are not supported"));
      } else {
        self->svc_.on_message(*self, text);
      }
      self->read();
    });
  }

  void write_next() {
    using namespace service_detail;
    ws_.async_write(net::buffer(*queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) {
                        self->closed();
                        return;
                      }
                      self->queue_.pop_front();
                      if (!self->queue_.empty()) self->write_next();
                    });
  }

  void closed() {
    if (closed_) return;
    closed_ = true;
    queue_.clear();
    svc_.detach(id_);
  }

  service_detail::websocket::stream<service_detail::beast::tcp_stream> ws_;
  service_detail::beast::flat_buffer buffer_;
  Service& svc_;
  std::uint64_t id_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool closed_ = false;
};

class Service::HttpConnection : public std::enable_shared_from_this<Service::HttpConnection> {
 public:
  HttpConnection(service_detail::tcp::socket&& socket, Service& svc)
      : stream_(std::move(socket)), svc_(svc) {}

  void start() {
    using namespace service_detail;
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       if (!ec) self->dispatch();
                     });
  }

 private:
  void dispatch() {
    using namespace service_detail;
    if (websocket::is_upgrade(req_)) {
      stream_.expires_never();
      auto client = std::make_shared<WsClient>(stream_.release_socket(), svc_, svc_.next_id_++);
      client->start(std::move(req_));
      return;
    }
    auto res = std::make_shared<http::response<http::string_body>>(svc_.http_response(req_));
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ec;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
    });
  }

  service_detail::beast::tcp_stream stream_;
  service_detail::beast::flat_buffer buffer_;
  service_detail::http::request<service_detail::http::string_body> req_;
  Service& svc_;
};

// ---------------------------------------------------------------------------

inline unsigned short Service::start() {
  using namespace service_detail;
  beast::error_code ec;
  const auto addr = net::ip::make_address(opt_.address, ec);
  if (ec) throw ServiceError("invalid bind address '" + opt_.address + "'");
  const tcp::endpoint ep(addr, opt_.port);
  acceptor_.open(ep.protocol(), ec);
  if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) acceptor_.bind(ep, ec);
  if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
  if (ec) {
    throw ServiceError("cannot bind " + opt_.address + ":" + std::to_string(opt_.port) + ": " +
                       ec.message());
  }
  const unsigned short port = acceptor_.local_endpoint().port();
  accept();
  schedule_broadcast(std::chrono::steady_clock::now());
  io_thread_ = std::thread([this] { ioc_.run(); });
  return port;
}

inline void Service::stop() {
  if (!io_thread_.joinable()) return;
  std::promise<void> done;
  service_detail::net::post(ioc_, [this, &done] {
    service_detail::beast::error_code ec;
    acceptor_.close(ec);
    timer_.cancel();
    for (auto& [id, c] : clients_) c->close();
    clients_.clear();
    client_count_ = 0;
    done.set_value();
  });
  done.get_future().wait();
  ioc_.stop();
  io_thread_.join();
}

inline void Service::accept() {
  using namespace service_detail;
  acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) {
      if (ec == net::error::operation_aborted) return;
    } else {
      std::make_shared<HttpConnection>(std::move(socket), *this)->start();
    }
    accept();
  });
}

// Absolute deadlines keep the average rate exact even when a broadcast runs late.
inline void Service::schedule_broadcast(std::chrono::steady_clock::time_point at) {
  using namespace service_detail;
  timer_.expires_at(at);
  timer_.async_wait([this, at](beast::error_code ec) {
    if (ec) return;
    if (!clients_.empty()) {
      if (const auto snap = engine_.snapshot()) {
        broadcast(std::make_shared<const std::string>(protocol::snapshot_json(*snap).dump()), true);
      }
    }
    const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / opt_.snapshot_hz));
    auto next = at + period;
    const auto now = std::chrono::steady_clock::now();
    if (now - next > std::chrono::seconds(1)) next = now;
    schedule_broadcast(next);
  });
}

inline void Service::broadcast(std::shared_ptr<const std::string> msg, bool droppable) {
  for (auto& [id, c] : clients_) c->send(msg, droppable);
}

inline void Service::attach(const std::shared_ptr<WsClient>& c) {
  clients_[c->id()] = c;
  client_count_ = clients_.size();
}

inline void Service::detach(std::uint64_t id) {
  clients_.erase(id);
  client_count_ = clients_.size();
  if (token_holder_ == id) token_holder_ = 0;
}

inline void Service::on_message(WsClient& from, const std::string& text) {
  using namespace protocol;
  ClientMessage msg;
  try {
    msg = parse_client_message(text);
  } catch (const ProtocolError& e) {
    from.send(fault_message(e.code(), e.what()));
    return;
  }

  if (auto* in = std::get_if<DeviceInputMsg>(&msg)) {
    if (token_holder_ == 0) token_holder_ = from.id();
    if (token_holder_ != from.id()) {
      from.send(fault_message(kInputTokenHeld, "another client holds the input token"));
      return;
    }
    engine_.submit_input(in->input);
  } else if (auto* d = std::get_if<CArmDeltaMsg>(&msg)) {
    carm_ = set_carm(carm_, {deg_to_rad(d->alpha), deg_to_rad(d->beta), deg_to_rad(d->gamma)});
    send_fluoro(nullptr);
  } else if (auto* c = std::get_if<SessionControlMsg>(&msg)) {
    // The reply hops back onto the io thread; the engine never waits on a socket.
    std::weak_ptr<WsClient> weak = from.shared_from_this();
    engine_.submit_control({*c, [this, weak](const std::string& reply) {
                              service_detail::net::post(ioc_, [weak, reply] {
                                if (auto client = weak.lock()) client->send(reply);
                              });
                            }});
  } else {
    send_fluoro(&from);
  }
}

inline void Service::send_fluoro(WsClient* requester) {
  const auto snap = engine_.snapshot();
  const Scene scene = engine_.scene_copy();
  const FluoroImage img = capture_scene(scene, snap->sample.rsr_actual, carm_);
  ++fluoro_seq_;
  std::ostringstream pgm;
  write_pgm(pgm, img);
  fluoro_pgm_ = pgm.str();
  const EulerAngles rel = rotation_to_euler(carm_.rotation * default_carm_.rotation.inverse());
  const std::string ref = "/fluoro/" + std::to_string(fluoro_seq_) + ".pgm";
  auto frame = std::make_shared<const std::string>(
      protocol::fluoro_frame_json(img, fluoro_seq_, ref, rel).dump());
  if (requester) {
    requester->send(frame, false);
  } else {
    broadcast(frame, false);
  }
}

inline service_detail::http::response<service_detail::http::string_body> Service::http_response(
    const service_detail::http::request<service_detail::http::string_body>& req) {
  using namespace service_detail;
  http::response<http::string_body> res;
  res.version(req.version());
  res.keep_alive(false);
  res.set(http::field::access_control_allow_origin, "*");
  auto reply = [&](http::status st, const std::string& type, std::string body) {
    res.result(st);
    res.set(http::field::content_type, type);
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
  };
  if (req.method() != http::verb::get) {
    return reply(http::status::method_not_allowed, "text/plain", "only GET is supported\n");
  }
  const std::string target(req.target());
  if (target == "/scene") {
    return reply(http::status::ok, "application/json",
                 protocol::scene_json(engine_.scene_copy()).dump());
  }
  const std::string prefix = "/fluoro/";
  if (target.rfind(prefix, 0) == 0) {
    const std::string want = prefix + std::to_string(fluoro_seq_) + ".pgm";
    if (fluoro_seq_ > 0 && target == want) {
      return reply(http::status::ok, "image/x-portable-graymap", fluoro_pgm_);
    }
    return reply(http::status::not_found, "text/plain", "no such frame (only the latest is kept)\n");
  }
  return reply(http::status::not_found, "text/plain", "not found\n");
}

}  // namespace fracsim
