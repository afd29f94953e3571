#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "fracsim/service.hpp"

using namespace fracsim;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using protocol::json;

namespace {

Scene default_scene() {
  return load_scene_file(std::string(FRACSIM_SOURCE_DIR) + "/scenes/femur_default.scene");
}

class Client {
 public:
  explicit Client(unsigned short port) : ws_(ioc_) {
    tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/");
  }

  void send(const std::string& text) { ws_.write(net::buffer(text)); }

  json read() {
    beast::flat_buffer buf;
    ws_.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  }

  // Next message of the given type, skipping snapshots and anything else.
  json read_type(const std::string& type, int limit = 2000) {
    for (int i = 0; i < limit; ++i) {
      json j = read();
      if (j.at("type") == type) return j;
    }
    throw std::runtime_error("no " + type + " message");
  }

  void close() { ws_.close(websocket::close_code::normal); }

 private:
  net::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
};

http::response<http::string_body> http_get(unsigned short port, const std::string& target,
                                           http::verb verb = http::verb::get) {
  net::io_context ioc;
  tcp::resolver resolver(ioc);
  beast::tcp_stream stream(ioc);
  stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
  http::request<http::string_body> req{verb, target, 11};
  req.set(http::field::host, "127.0.0.1");
  http::write(stream, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(stream, buf, res);
  return res;
}

struct Fixture {
  Engine engine{default_scene()};
  EngineRunner runner{engine};
  Service service{engine, ServiceOptions{"127.0.0.1", 0, 60.0}};
  unsigned short port = 0;

  Fixture() {
    runner.start();
    port = service.start();
  }
  ~Fixture() {
    service.stop();
    runner.stop();
  }
};

std::string device_input(double z_mm) {
  protocol::DeviceInputMsg m;
  m.input.pose.pz = z_mm;
  return protocol::encode(m);
}

}  // namespace

TEST(Service, SnapshotRate) {
  Fixture f;
  Client c(f.port);
  c.read_type("snapshot");
  const auto t0 = std::chrono::steady_clock::now();
  int n = 0;
  while (std::chrono::steady_clock::now() - t0 < std::chrono::seconds(2)) {
    if (c.read().at("type") == "snapshot") ++n;
  }
  const double hz = n / std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_NEAR(hz, 60.0, 5.0);
}

TEST(Service, SnapshotCarriesCsvFields) {
  Fixture f;
  Client c(f.port);
  const json s = c.read_type("snapshot");
  EXPECT_EQ(s.at("v"), 1);
  for (const auto& col : trajectory_columns()) EXPECT_TRUE(s.contains(col)) << col;
  EXPECT_TRUE(s.contains("tick"));
  EXPECT_TRUE(s.contains("paused"));
}

TEST(Service, DeviceInputMovesFollower) {
  Fixture f;
  Client c(f.port);
  c.send(device_input(0.0));
  c.read_type("snapshot");
  // Below max_v * dt, so the increment passes through unscaled.
  c.send(device_input(0.04));
  double z = 0.0;
  for (int i = 0; i < 200 && z < 200.039; ++i) z = c.read_type("snapshot").at("rsr_t_pz").get<double>();
  EXPECT_NEAR(z, 200.04, 1e-9);
}

TEST(Service, InputTokenGoesToFirstSender) {
  Fixture f;
  Client a(f.port);
  Client b(f.port);
  a.send(device_input(0.0));
  a.read_type("snapshot");
  a.read_type("snapshot");
  b.send(device_input(1.0));
  const json fault = b.read_type("fault");
  EXPECT_EQ(fault.at("code"), "input_token_held");
  a.close();
  // Token released on disconnect.
  for (int i = 0; i < 100 && f.service.client_count() != 1; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  b.send(device_input(1.0));
  b.send(protocol::encode(protocol::SessionControlMsg{protocol::ControlAction::Pause, {}, {}, 5}));
  const json next = b.read_type("ack");
  EXPECT_EQ(next.at("id"), 5);
}

TEST(Service, PauseAckAndPausedSnapshots) {
  Fixture f;
  Client c(f.port);
  c.send(R"({"v":1,"type":"session","action":"pause","id":11})");
  const json ack = c.read_type("ack");
  EXPECT_EQ(ack.at("action"), "pause");
  EXPECT_EQ(ack.at("id"), 11);
  const json a = c.read_type("snapshot");
  const json b = c.read_type("snapshot");
  EXPECT_TRUE(a.at("paused").get<bool>());
  EXPECT_EQ(a.at("tick"), b.at("tick"));
  c.send(R"({"v":1,"type":"session","action":"set_param","name":"bogus","value":1,"id":12})");
  const json fault = c.read_type("fault");
  EXPECT_EQ(fault.at("code"), "invalid_param");
  EXPECT_EQ(fault.at("id"), 12);
}

TEST(Service, MalformedMessagesGetFaults) {
  Fixture f;
  Client c(f.port);
  c.send("{not json");
  EXPECT_EQ(c.read_type("fault").at("code"), "malformed");
  c.send(R"({"v":9,"type":"device_input"})");
  EXPECT_EQ(c.read_type("fault").at("code"), "unsupported_version");
  c.send(R"({"v":1,"type":"warp"})");
  EXPECT_EQ(c.read_type("fault").at("code"), "unknown_type");
  // Still connected and served.
  c.read_type("snapshot");
}

TEST(Service, FluoroFrameAndRaster) {
  Fixture f;
  Client c(f.port);
  c.send(R"({"v":1,"type":"carm_delta","alpha":0,"beta":0,"gamma":15})");
  const json frame = c.read_type("fluoro_frame");
  EXPECT_NEAR(frame.at("carm_qg").get<double>(), 15.0, 1e-9);
  EXPECT_EQ(frame.at("overlay").size(), 7u);
  const auto res = http_get(f.port, frame.at("raster").get<std::string>());
  EXPECT_EQ(res.result(), http::status::ok);
  EXPECT_EQ(res.body().substr(0, 12), "P5\n512 512\n2");
  EXPECT_EQ(http_get(f.port, "/fluoro/999.pgm").result(), http::status::not_found);
}

TEST(Service, SceneEndpoint) {
  Fixture f;
  const auto res = http_get(f.port, "/scene");
  ASSERT_EQ(res.result(), http::status::ok);
  const json j = json::parse(res.body());
  EXPECT_EQ(j.at("proximal").size(), 2u);
  EXPECT_NEAR(j.at("ring_home").at("pz").get<double>(), 200.0, 1e-9);
  EXPECT_EQ(http_get(f.port, "/nope").result(), http::status::not_found);
  EXPECT_EQ(http_get(f.port, "/scene", http::verb::post).result(), http::status::method_not_allowed);
}

TEST(Service, BindFailureIsReported) {
  Fixture f;
  Engine other{default_scene()};
  Service clash{other, ServiceOptions{"127.0.0.1", f.port, 60.0}};
  EXPECT_THROW(clash.start(), ServiceError);
  Service bad{other, ServiceOptions{"not-an-address", 0, 60.0}};
  EXPECT_THROW(bad.start(), ServiceError);
}

TEST(Service, WatchersDoNotSlowTheEngine) {
  auto rate = [](int watchers) {
    Fixture f;
    std::vector<std::unique_ptr<Client>> clients;
    for (int i = 0; i < watchers; ++i) clients.push_back(std::make_unique<Client>(f.port));
    std::atomic<bool> stop{false};
    std::vector<std::thread> readers;
    for (auto& c : clients) {
      readers.emplace_back([&stop, c = c.get()] {
        while (!stop) c->read();
      });
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    const auto n0 = f.engine.engine_ticks();
    const auto t0 = std::chrono::steady_clock::now();
    std::this_thread::sleep_for(std::chrono::seconds(2));
    const double hz = (f.engine.engine_ticks() - n0) /
                      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    stop = true;
    // Readers wake on the next snapshot and exit.
    for (auto& t : readers) t.join();
    return hz;
  };
  const double alone = rate(0);
  const double watched = rate(10);
  EXPECT_NEAR(alone, 1000.0, 50.0);
  EXPECT_LT(std::abs(watched - alone) / alone, 0.05);
}
