#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>

#include "voxhub/backends.hpp"

namespace voxhub {

/// Serves backends over the HTTP backend protocol:
///   POST /v1/transcribe, POST /v1/synthesize, GET /v1/voices,
///   POST /v1/respond (default agent), POST /agents/<id>/v1/respond.
/// Any of stt / tts / agents may be absent; their routes then answer 404.
class BackendServer {
 public:
  BackendServer(std::shared_ptr<SpeechToText> stt, std::shared_ptr<TextToSpeech> tts,
                AgentRouter agents = {}, std::string default_agent = {});
  ~BackendServer();

  BackendServer(const BackendServer&) = delete;
  BackendServer& operator=(const BackendServer&) = delete;

  /// Binds and returns the port (port 0 picks a free one). Throws config_error.
  int bind(const std::string& host, int port);
  /// Serves on a background thread until stop().
  void start();
  /// Serves on the calling thread until stop().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits "http://host:port/path" into ("http://host:port", "/path").
std::pair<std::string, std::string> split_url(const std::string& url);

}  // namespace voxhub
