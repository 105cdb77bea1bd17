#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "voxhub/gateway.hpp"

namespace voxhub {

inline constexpr std::string_view kVersion = "0.1.0";

/// Network binding of a Gateway:
///   GET /session  WebSocket; text frames carry JSON control messages,
///                 binary frames carry framed messages with audio.
///   GET /healthz  {"status":"ok","version":...}
///   GET /metrics  metrics snapshot as JSON
class GatewayServer {
 public:
  /// Binds immediately; port 0 picks a free port. Throws config_error.
  GatewayServer(Gateway& gateway, const std::string& host, std::uint16_t port);
  ~GatewayServer();

  GatewayServer(const GatewayServer&) = delete;
  GatewayServer& operator=(const GatewayServer&) = delete;

  std::uint16_t port() const;

  void start();
  /// Accepts connections on the calling thread until stop().
  void run();
  /// Closes the listener and all open connections, then joins them.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// "host:port" -> pair; throws config_error.
std::pair<std::string, std::uint16_t> parse_listen(const std::string& listen);

}  // namespace voxhub
