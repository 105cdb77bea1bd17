#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <thread>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "voxhub/error.hpp"
#include "voxhub/server.hpp"

using namespace voxhub;
namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

std::pair<int, std::string> http_get(std::uint16_t port, const std::string& target) {
  asio::io_context ioc;
  tcp::socket sock(ioc);
  sock.connect({asio::ip::make_address("127.0.0.1"), port});
  http::request<http::empty_body> req{http::verb::get, target, 11};
  req.set(http::field::host, "127.0.0.1");
  http::write(sock, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(sock, buf, res);
  return {res.result_int(), res.body()};
}

class Client {
 public:
  explicit Client(std::uint16_t port) : ws_(ioc_) {
    ws_.next_layer().connect({asio::ip::make_address("127.0.0.1"), port});
    ws_.handshake("127.0.0.1", "/session");
  }

  void send_text(const ClientMessage& m) { send_raw_text(to_json_text(m)); }
  void send_raw_text(const std::string& text) {
    ws_.text(true);
    ws_.write(asio::buffer(text));
  }
  void send_binary(const Bytes& frame) {
    ws_.binary(true);
    ws_.write(asio::buffer(frame));
  }

  /// Next server message and whether it came as a binary frame.
  std::pair<ServerMessage, bool> read() {
    beast::flat_buffer buf;
    ws_.read(buf);
    std::string data = beast::buffers_to_string(buf.data());
    if (ws_.got_text()) return {server_from_json_text(data), false};
    Bytes bytes(data.begin(), data.end());
    return {unframe_server(bytes), true};
  }

  std::string open() {
    send_text(ClientMessage::hello());
    auto [ack, ack_binary] = read();
    REQUIRE(ack.kind == ServerKind::session_ack);
    CHECK_FALSE(ack_binary);
    auto [catalog, catalog_binary] = read();
    CHECK(catalog.kind == ServerKind::catalog);
    CHECK_FALSE(catalog_binary);
    return ack.session_id;
  }

  /// Reads one full turn: transcript, chunks, turn_end.
  std::vector<ServerMessage> read_turn() {
    std::vector<ServerMessage> out;
    for (;;) {
      auto [m, binary] = read();
      CHECK(binary == (m.kind == ServerKind::chunk_audio));
      out.push_back(m);
      if (m.kind == ServerKind::turn_end || m.kind == ServerKind::error) return out;
    }
  }

  void close() { ws_.close(websocket::close_code::normal); }

 private:
  asio::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
};

struct Fixture {
  Gateway gateway;
  GatewayServer server;

  explicit Fixture(GatewayConfig cfg) : gateway(std::move(cfg)), server(gateway, "127.0.0.1", 0) { server.start(); }
};

GatewayConfig wallclock_config() {
  GatewayConfig cfg = GatewayConfig::defaults();
  cfg.time_mode = TimeMode::wallclock;
  cfg.stt_model = LatencyModel::fixed(30);
  cfg.agent_model = LatencyModel::fixed(5);
  cfg.tts_model = LatencyModel::fixed(150);
  return cfg;
}

}  // namespace

TEST_CASE("parse_listen") {
  CHECK(parse_listen("127.0.0.1:8080") == std::pair<std::string, std::uint16_t>{"127.0.0.1", 8080});
  CHECK_THROWS_AS(parse_listen("nope"), Error);
  CHECK_THROWS_AS(parse_listen("h:99999"), Error);
}

TEST_CASE("health and metrics endpoints") {
  Fixture f(GatewayConfig::defaults());
  auto [status, body] = http_get(f.server.port(), "/healthz");
  CHECK(status == 200);
  auto health = nlohmann::json::parse(body);
  CHECK(health["status"] == "ok");
  CHECK(health["version"] == std::string(kVersion));

  auto [mstatus, mbody] = http_get(f.server.port(), "/metrics");
  CHECK(mstatus == 200);
  CHECK(nlohmann::json::parse(mbody)["global"]["turns"] == 0);
  CHECK(http_get(f.server.port(), "/nothing").first == 404);
}

TEST_CASE("a turn over the websocket") {
  Fixture f(GatewayConfig::defaults());
  Client c(f.server.port());
  std::string sid = c.open();

  c.send_text(ClientMessage::select_agent(sid, "triage"));
  auto [ack, _] = c.read();
  CHECK(ack.kind == ServerKind::session_ack);
  CHECK(ack.agent_id == "triage");

  const VoiceDescriptor& voice = f.gateway.catalog().voices[0];
  c.send_binary(frame_message(ClientMessage::utterance_audio(sid, "n1", encode_sim_audio("hello", voice))));
  auto turn = c.read_turn();
  REQUIRE(turn.size() == 4);
  CHECK(turn[0].kind == ServerKind::transcript);
  CHECK(turn[0].text == "hello");
  CHECK(turn[1].seq == 1);
  CHECK(turn[2].seq == 2);
  CHECK(decode_sim_audio(*turn[1].audio).text == "Welcome to triage.");
  CHECK(turn[3].kind == ServerKind::turn_end);
  CHECK(turn[3].report->first_audio_ms == 800 + 100 + 1122);

  c.send_text(ClientMessage::utterance_text(sid, "n2", "chest pain"));
  auto second = c.read_turn();
  CHECK(second.front().text == "chest pain");
  CHECK(second.back().kind == ServerKind::turn_end);

  auto metrics = nlohmann::json::parse(http_get(f.server.port(), "/metrics").second);
  CHECK(metrics["global"]["turns"] == 2);
  CHECK(metrics["sessions"].contains(sid));
  c.close();
}

TEST_CASE("errors keep the connection usable") {
  GatewayConfig cfg = GatewayConfig::defaults();
  cfg.max_frame_bytes = 4096;
  Fixture f(cfg);
  Client c(f.server.port());
  std::string sid = c.open();

  c.send_raw_text(R"({"kind":"foo","session_id":"x"})");
  CHECK(c.read().first.code == "protocol");
  c.send_raw_text("{not json");
  CHECK(c.read().first.code == "protocol");

  ClientMessage big = ClientMessage::utterance_audio(sid, "b", AudioEnvelope{AudioFormat::opaque, Bytes(10000, 1)});
  c.send_binary(frame_message(big, 1u << 20));
  CHECK(c.read().first.code == "frame-too-large");

  c.send_text(ClientMessage::select_voice(sid, "vx"));
  CHECK(c.read().first.code == "unknown-voice");

  c.send_text(ClientMessage::utterance_text(sid, "ok", "hello"));
  CHECK(c.read_turn().back().kind == ServerKind::turn_end);
}

TEST_CASE("a second utterance during a turn is refused") {
  Fixture f(wallclock_config());
  Client c(f.server.port());
  std::string sid = c.open();
  c.send_text(ClientMessage::utterance_text(sid, "n1", "hello"));
  c.send_text(ClientMessage::utterance_text(sid, "n2", "again"));

  std::vector<ServerMessage> n1, n2;
  while (n1.empty() || n1.back().kind != ServerKind::turn_end || n2.empty()) {
    auto [m, binary] = c.read();
    (m.nonce == "n1" ? n1 : n2).push_back(m);
  }
  REQUIRE(n2.size() == 1);
  CHECK(n2[0].kind == ServerKind::error);
  CHECK(n2[0].code == "turn-in-progress");
  CHECK(n1.front().kind == ServerKind::transcript);
  CHECK(n1.back().kind == ServerKind::turn_end);
}

TEST_CASE("sessions are isolated across connections") {
  Fixture f(wallclock_config());
  constexpr int kClients = 8;
  std::vector<std::thread> threads;
  std::atomic<int> leaks{0}, done{0};
  for (int k = 0; k < kClients; ++k)
    threads.emplace_back([&, k] {
      Client c(f.server.port());
      std::string sid = c.open();
      for (int t = 0; t < 2; ++t) {
        std::string text = "client " + std::to_string(k) + " turn " + std::to_string(t);
        c.send_text(ClientMessage::utterance_text(sid, "t" + std::to_string(t), text));
        auto turn = c.read_turn();
        for (const auto& m : turn)
          if (m.session_id != sid) ++leaks;
        if (turn.front().text != text) ++leaks;
      }
      c.close();
      ++done;
    });
  for (auto& t : threads) t.join();
  CHECK(done == kClients);
  CHECK(leaks == 0);
  for (int i = 0; i < 100 && f.gateway.metrics_snapshot().active_sessions != 0; ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  CHECK(f.gateway.metrics_snapshot().active_sessions == 0);
}

TEST_CASE("stop closes open connections") {
  Gateway gateway(GatewayConfig::defaults());
  auto server = std::make_unique<GatewayServer>(gateway, "127.0.0.1", 0);
  server->start();
  Client c(server->port());
  c.open();
  server->stop();
  CHECK_THROWS(c.read());
}
