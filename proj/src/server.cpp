#include "voxhub/server.hpp"

#include <sys/socket.h>

#include <atomic>
#include <future>
#include <limits>
#include <list>
#include <mutex>
#include <set>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "voxhub/error.hpp"

namespace voxhub {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

std::pair<std::string, std::uint16_t> parse_listen(const std::string& listen) {
  auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::config_error, "listen must be host:port");
  try {
    int port = std::stoi(listen.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    return {listen.substr(0, colon), static_cast<std::uint16_t>(port)};
  } catch (const std::exception&) {
    throw Error(ErrorCode::config_error, "bad port in '" + listen + "'");
  }
}

struct GatewayServer::Impl {
  Gateway& gateway;
  asio::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::atomic<bool> stopping{false};
  std::thread accept_thread;

  struct Connection {
    std::thread thread;
    int fd = -1;
    std::atomic<bool> done{false};
  };
  std::mutex conn_mu;
  std::list<Connection> connections;

  explicit Impl(Gateway& gw) : gateway(gw) {}

  void accept_loop() {
    while (!stopping) {
      beast::error_code ec;
      tcp::socket sock(ioc);
      acceptor.accept(sock, ec);
      if (ec) {
        if (stopping) break;
        continue;
      }
      std::lock_guard lock(conn_mu);
      reap_locked();
      auto& conn = connections.emplace_back();
      conn.fd = sock.native_handle();
      conn.thread = std::thread([this, s = std::move(sock), &conn]() mutable {
        serve_connection(std::move(s));
        conn.done = true;
      });
    }
  }

  void reap_locked() {
    for (auto it = connections.begin(); it != connections.end();) {
      if (it->done) {
        it->thread.join();
        it = connections.erase(it);
      } else {
        ++it;
      }
    }
  }

  void serve_connection(tcp::socket sock) {
    beast::error_code ec;
    beast::flat_buffer buffer;
    http::request<http::string_body> req;
    http::read(sock, buffer, req, ec);
    if (ec) return;
    if (websocket::is_upgrade(req) && req.target() == "/session") {
      serve_session(std::move(sock), req);
      return;
    }
    http::response<http::string_body> res;
    res.version(req.version());
    res.keep_alive(false);
    res.set(http::field::content_type, "application/json");
    if (req.method() == http::verb::get && req.target() == "/healthz") {
      res.result(http::status::ok);
      res.body() = nlohmann::json{{"status", "ok"}, {"version", kVersion}}.dump();
    } else if (req.method() == http::verb::get && req.target() == "/metrics") {
      res.result(http::status::ok);
      res.body() = to_json(gateway.metrics_snapshot()).dump();
    } else {
      res.result(http::status::not_found);
      res.body() = R"({"error":"not found"})";
    }
    res.prepare_payload();
    http::write(sock, res, ec);
    sock.shutdown(tcp::socket::shutdown_both, ec);
  }

  void serve_session(tcp::socket sock, const http::request<http::string_body>& req) {
    websocket::stream<tcp::socket> ws(std::move(sock));
    const std::size_t max_frame = gateway.config().max_frame_bytes;
    ws.read_message_max(max_frame + 64 * 1024);
    beast::error_code ec;
    ws.accept(req, ec);
    if (ec) return;

    std::mutex write_mu;
    std::set<std::string> opened;
    bool broken = false;
    MessageSink sink = [&](const ServerMessage& msg) {
      std::lock_guard lock(write_mu);
      if (msg.kind == ServerKind::session_ack) opened.insert(msg.session_id);
      if (broken) return;
      beast::error_code wec;
      if (msg.audio) {
        Bytes frame = frame_message(msg, std::numeric_limits<std::size_t>::max());
        ws.binary(true);
        ws.write(asio::buffer(frame), wec);
      } else {
        std::string text = to_json_text(msg);
        ws.text(true);
        ws.write(asio::buffer(text), wec);
      }
      if (wec) broken = true;
    };

    std::list<std::future<void>> turns;
    for (;;) {
      beast::flat_buffer buf;
      ws.read(buf, ec);
      if (ec) break;
      turns.remove_if([](auto& f) {
        return f.wait_for(std::chrono::seconds(0)) == std::future_status::ready;
      });
      auto data = buf.cdata();
      std::span<const std::uint8_t> bytes(static_cast<const std::uint8_t*>(data.data()), data.size());
      ClientMessage msg;
      try {
        if (ws.got_text()) {
          if (bytes.size() > max_frame) throw Error(ErrorCode::frame_too_large, "control frame too large");
          msg = client_from_json_text(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
        } else {
          msg = unframe_client(bytes, max_frame);
        }
      } catch (const Error& e) {
        sink(ServerMessage::make_error(to_string(e.code()), e.what()));
        continue;
      }
      // Turns run beside the reader so a second utterance can be refused.
      gateway.handle(msg, sink, [&turns](std::function<void()> turn) {
        turns.push_back(std::async(std::launch::async, std::move(turn)));
      });
    }
    for (auto& f : turns) f.wait();
    for (const auto& id : opened) gateway.close_session(id);
  }
};

GatewayServer::GatewayServer(Gateway& gateway, const std::string& host, std::uint16_t port)
    : impl_(std::make_unique<Impl>(gateway)) {
  beast::error_code ec;
  auto address = asio::ip::make_address(host == "localhost" ? "127.0.0.1" : host, ec);
  if (ec) throw Error(ErrorCode::config_error, "bad listen address '" + host + "'");
  tcp::endpoint ep(address, port);
  auto& acc = impl_->acceptor;
  acc.open(ep.protocol(), ec);
  if (!ec) acc.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) acc.bind(ep, ec);
  if (!ec) acc.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) throw Error(ErrorCode::config_error, "cannot listen on " + host + ":" + std::to_string(port) + ": " + ec.message());
}

GatewayServer::~GatewayServer() { stop(); }

std::uint16_t GatewayServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void GatewayServer::start() {
  impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
}

void GatewayServer::run() { impl_->accept_loop(); }

void GatewayServer::stop() {
  if (!impl_ || impl_->stopping.exchange(true)) return;
  ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  std::lock_guard lock(impl_->conn_mu);
  for (auto& c : impl_->connections)
    if (!c.done) ::shutdown(c.fd, SHUT_RDWR);
  for (auto& c : impl_->connections) c.thread.join();
  impl_->connections.clear();
  beast::error_code ec;
  impl_->acceptor.close(ec);
}

}  // namespace voxhub
