#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "biohand/teleop.hpp"

using namespace biohand;
namespace asio = boost::asio;
namespace beast = boost::beast;
namespace ws = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

const std::string kScenarios = std::string(BIOHAND_SOURCE_DIR) + "/scenarios/";

Scenario live_scenario() {
  Scenario sc = load_scenario(kScenarios + "touch_mouse.json");
  sc.reference.kind = "live";
  return sc;
}

StateMessage populated_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  auto vec = [&](int n) { return Vec(Vec::NullaryExpr(n, [&] { return u(rng); })); };
  StateMessage m;
  m.t = 12.34;
  m.controller = "adaptive";
  m.q = vec(24);
  m.q_d = vec(24);
  m.fingertips = {{"th", Vec3(u(rng), u(rng), u(rng))}, {"ff", Vec3(1e-17, -2.5e300, 0.1)}};
  m.contacts = {{"ff", "mouse", Vec3(u(rng), u(rng), u(rng)), Vec3(0, 0, 1), 0.123456789012345678}};
  m.ks = vec(24);
  m.kd = vec(24);
  m.v = vec(24);
  m.aggregates = {42, 1.5, 0.7, 9};
  m.limit_lo = vec(24);
  m.limit_hi = vec(24);
  return m;
}

CommandMessage command(const Vec& q) {
  CommandMessage c;
  c.q_d = q;
  return c;
}

/// Minimal synchronous client.
struct Client {
  asio::io_context io;
  ws::stream<tcp::socket> stream{io};

  explicit Client(unsigned short port) {
    stream.next_layer().connect({asio::ip::make_address("127.0.0.1"), port});
    stream.handshake("127.0.0.1", "/teleop");
  }
  nlohmann::json read() {
    beast::flat_buffer buf;
    stream.read(buf);
    return nlohmann::json::parse(beast::buffers_to_string(buf.data()));
  }
  void write(const std::string& s) { stream.write(asio::buffer(s)); }
};

struct RunningServer {
  TeleopServer server;
  std::atomic<bool> stop{false};
  std::thread thread;

  explicit RunningServer(const Scenario& sc) : server(sc, 0) {
    thread = std::thread([this] { server.run(stop, true); });
  }
  ~RunningServer() {
    stop = true;
    thread.join();
  }
};

}  // namespace

TEST(Codec, StateRoundTripIsIdentity) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 20; ++k) {
    const StateMessage m = populated_state(rng);
    const StateMessage back = decode_state(encode_state(m));
    EXPECT_TRUE(back == m);
    for (int i = 0; i < 24; ++i) ASSERT_NEAR(back.q[i], m.q[i], 1e-12);
  }
}

TEST(Codec, CommandRoundTripIsIdentity) {
  CommandMessage c = command(Vec::LinSpaced(24, -0.3, 0.9));
  EXPECT_TRUE(decode_command(encode_command(c)) == c);
  c.controller = "position";
  c.reset = true;
  EXPECT_TRUE(decode_command(encode_command(c)) == c);
}

TEST(Codec, WireFieldNames) {
  std::mt19937_64 rng(2);
  const auto j = nlohmann::json::parse(encode_state(populated_state(rng)));
  for (const char* key : {"type", "version", "t", "q", "q_d", "fingertips", "contacts", "profiles", "aggregates"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["type"], "state");
  EXPECT_TRUE(j["profiles"].contains("ks") && j["profiles"].contains("v"));
}

TEST(Codec, MalformedMessagesAreProtocolErrors) {
  const std::string good = encode_command(command(Vec::Zero(24)));
  nlohmann::json j = nlohmann::json::parse(good);
  EXPECT_THROW(decode_command("not json"), ProtocolError);
  EXPECT_THROW(decode_command("[1,2]"), ProtocolError);
  auto without = j;
  without.erase("q_d");
  EXPECT_THROW(decode_command(without.dump()), ProtocolError);
  auto version = j;
  version["version"] = 2;
  EXPECT_THROW(decode_command(version.dump()), ProtocolError);
  auto type = j;
  type["type"] = "state";
  EXPECT_THROW(decode_command(type.dump()), ProtocolError);
  auto text = j;
  text["q_d"][3] = "x";
  EXPECT_THROW(decode_command(text.dump()), ProtocolError);
  auto ctl = j;
  ctl["controller"] = "magic";
  EXPECT_THROW(decode_command(ctl.dump()), ProtocolError);
  auto reset = j;
  reset["reset"] = "yes";
  EXPECT_THROW(decode_command(reset.dump()), ProtocolError);
  std::mt19937_64 rng(3);
  auto state = nlohmann::json::parse(encode_state(populated_state(rng)));
  state["profiles"].erase("kd");
  EXPECT_THROW(decode_state(state.dump()), ProtocolError);
}

TEST(Loop, WrongLengthOrNonFiniteRejected) {
  TeleopLoop loop(live_scenario());
  EXPECT_THROW(loop.post(command(Vec::Zero(23))), ProtocolError);
  Vec q = Vec::Zero(24);
  q[5] = std::nan("");
  EXPECT_THROW(loop.post(command(q)), ProtocolError);
  EXPECT_EQ(loop.commands_posted(), 0u);
}

TEST(Loop, CommandBeyondLimitAppliedAtTheLimit) {
  const Scenario sc = live_scenario();
  TeleopLoop loop(sc);
  Vec q = Vec::Zero(24);
  q[3] = 50.0;
  q[7] = -50.0;
  loop.post(command(q));
  loop.tick();
  const Vec applied = loop.snapshot().q_d;
  EXPECT_EQ(applied[3], sc.model.limit_hi()[3]);
  EXPECT_EQ(applied[7], sc.model.limit_lo()[7]);
  EXPECT_TRUE(applied == sc.model.clamp(q));
}

TEST(Loop, LatestCommandWinsAndOnePerTick) {
  TeleopLoop loop(live_scenario());
  loop.post(command(Vec::Constant(24, 0.1)));
  loop.post(command(Vec::Constant(24, 0.2)));
  loop.post(command(Vec::Constant(24, 0.25)));
  loop.tick();
  EXPECT_EQ(loop.commands_posted(), 3u);
  EXPECT_EQ(loop.commands_applied(), 1u);
  const Scenario sc = live_scenario();
  EXPECT_TRUE(loop.snapshot().q_d == sc.model.clamp(Vec::Constant(24, 0.25)));
  loop.tick();
  EXPECT_EQ(loop.commands_applied(), 1u);
}

TEST(Loop, HeldReferenceWithoutCommands) {
  const Scenario sc = live_scenario();
  TeleopLoop loop(sc);
  for (int k = 0; k < 100; ++k) loop.tick();
  EXPECT_EQ(loop.ticks(), 100);
  EXPECT_TRUE(loop.snapshot().q_d == sc.model.clamp(sc.initial_q));
}

TEST(Loop, BroadcastDecimatedToRate) {
  TeleopLoop loop(live_scenario(), 30.0);
  int states = 0;
  for (int k = 0; k < 300; ++k)
    if (loop.tick()) ++states;
  // t = 0.01 .. 3.00 covers the 1/30 s slots 0..90
  EXPECT_EQ(states, 91);
}

TEST(Loop, StreamTimeMonotoneAcrossResets) {
  TeleopLoop loop(live_scenario(), 100.0);
  double last = -1.0;
  for (int k = 0; k < 200; ++k) {
    if (k == 77) {
      CommandMessage c = command(Vec::Zero(24));
      c.reset = true;
      c.controller = "fixed";
      loop.post(c);
    }
    if (auto s = loop.tick()) {
      ASSERT_GT(s->t, last);
      last = s->t;
    }
  }
  EXPECT_EQ(loop.snapshot().controller, "fixed");
  EXPECT_EQ(loop.snapshot().aggregates.ticks, 200 - 77);
}

TEST(Server, ClientReceivesStateAndCommandsApply) {
  RunningServer rs(live_scenario());
  Client c(rs.server.port());
  const StateMessage first = decode_state(c.read().dump());
  EXPECT_EQ(first.q.size(), 24);
  Vec target = Vec::Zero(24);
  target[4] = 99.0;
  c.write(encode_command(command(target)));
  const double hi = live_scenario().model.limit_hi()[4];
  bool seen = false;
  for (int k = 0; k < 200 && !seen; ++k) seen = decode_state(c.read().dump()).q_d[4] == hi;
  EXPECT_TRUE(seen) << "command never reflected in the state stream";
}

TEST(Server, MalformedMessageGetsErrorAndConnectionStays) {
  RunningServer rs(live_scenario());
  Client c(rs.server.port());
  c.write("{\"type\":\"command\",\"version\":1}");
  bool saw_error = false;
  for (int k = 0; k < 100 && !saw_error; ++k) {
    const auto j = c.read();
    if (j["type"] == "error") {
      saw_error = true;
      EXPECT_NE(j["message"].get<std::string>().find("q_d"), std::string::npos);
    }
  }
  EXPECT_TRUE(saw_error);
  c.write(encode_command(command(Vec::Zero(24))));
  EXPECT_EQ(c.read()["type"], "state");
  for (int k = 0; k < 100 && rs.server.loop().commands_posted() == 0; ++k)
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  EXPECT_EQ(rs.server.loop().commands_posted(), 1u);
}

TEST(Server, OtherPathsAreRefused) {
  RunningServer rs(live_scenario());
  asio::io_context io;
  ws::stream<tcp::socket> stream(io);
  stream.next_layer().connect({asio::ip::make_address("127.0.0.1"), rs.server.port()});
  EXPECT_THROW(stream.handshake("127.0.0.1", "/elsewhere"), boost::system::system_error);
}

TEST(Server, ServesThePanelFilesWhenAsked) {
  const std::string ui = std::string(BIOHAND_SOURCE_DIR) + "/ui";
  TeleopServer server(live_scenario(), 0, 30.0, "127.0.0.1", ui);
  std::atomic<bool> stop{false};
  std::thread t([&] { server.run(stop, true); });
  auto get = [&](const std::string& target) {
    asio::io_context io;
    tcp::socket sock(io);
    sock.connect({asio::ip::make_address("127.0.0.1"), server.port()});
    beast::http::request<beast::http::empty_body> req(beast::http::verb::get, target, 11);
    req.set(beast::http::field::host, "127.0.0.1");
    beast::http::write(sock, req);
    beast::flat_buffer buf;
    beast::http::response<beast::http::string_body> res;
    beast::http::read(sock, buf, res);
    return res;
  };
  const auto index = get("/");
  EXPECT_EQ(index.result(), beast::http::status::ok);
  EXPECT_NE(index.body().find("dist/main.js"), std::string::npos);
  EXPECT_EQ(get("/style.css?v=1")[beast::http::field::content_type], "text/css");
  EXPECT_EQ(get("/../CMakeLists.txt").result(), beast::http::status::not_found);
  EXPECT_EQ(get("/missing.js").result(), beast::http::status::not_found);
  Client c(server.port());  // the socket endpoint still works alongside
  EXPECT_EQ(c.read()["type"], "state");
  stop = true;
  t.join();
}

TEST(Server, BusyPortFailsAtStartup) {
  const TeleopServer a(live_scenario(), 0);
  EXPECT_THROW(TeleopServer(live_scenario(), a.port()), std::runtime_error);
}

TEST(Server, AdvancesWithNoClient) {
  RunningServer rs(live_scenario());
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  EXPECT_GT(rs.server.ticks(), 10);
}

TEST(Server, StalledClientDoesNotStallTheLoop) {
  RunningServer rs(live_scenario());
  Client c(rs.server.port());  // never reads
  const long before = rs.server.ticks();
  std::this_thread::sleep_for(std::chrono::milliseconds(400));
  EXPECT_GT(rs.server.ticks() - before, 20);
}

TEST(UiExport, ExportedTrajectoryLoadsWithoutClamping) {
  const Scenario sc = live_scenario();
  const Trajectory tr = load_trajectory(std::string(BIOHAND_SOURCE_DIR) + "/ui/fixtures/export_sample.csv", sc.model);
  EXPECT_EQ(tr.clamped_values, 0);
  EXPECT_GE(tr.samples.size(), 2u);
  EXPECT_EQ(tr.samples.front().q_d.size(), 24);
}
