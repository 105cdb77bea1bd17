#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "voxhub/backends.hpp"
#include "voxhub/chunker.hpp"
#include "voxhub/latency_model.hpp"
#include "voxhub/pipeline.hpp"
#include "voxhub/protocol.hpp"

namespace voxhub {

struct GatewayConfig {
  std::string listen = "127.0.0.1:8080";
  TimeMode time_mode = TimeMode::simulated;
  std::size_t max_sessions = 50;
  std::size_t max_frame_bytes = kDefaultMaxFrameBytes;
  Millis threshold_ms = kDefaultThresholdMs;
  /// Added to every chunk arrival in simulated mode.
  Millis transport_ms = 0;
  ChunkingConfig chunking;

  /// Empty means the builtin mock.
  std::string stt_url;
  std::string tts_url;
  LatencyModel stt_model = default_stt_model();
  LatencyModel tts_model = default_tts_model();
  LatencyModel agent_model = default_agent_model();
  std::size_t tts_max_concurrent = 0;
  std::chrono::milliseconds backend_timeout = kDefaultBackendTimeout;

  std::vector<AgentDescriptor> agents;
  std::vector<VoiceDescriptor> voices;

  /// Builtin backends, agents anamnesis + triage, voices f1 + m1.
  static GatewayConfig defaults();
  /// Missing keys keep their default; "agents"/"voices" replace the lists.
  static GatewayConfig from_json(const nlohmann::json& j);
  static GatewayConfig from_file(const std::filesystem::path& path);

  /// VOXHUB_STT_URL / VOXHUB_TTS_URL override the configured endpoints.
  void apply_environment();
  /// Throws config_error.
  void validate() const;
};

/// Instantiates mocks or HTTP clients for every backend in the config.
BackendSet make_backends(const GatewayConfig& cfg);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct LatencySummary {
  std::size_t turns = 0;
  double mean_first_audio_ms = 0.0;
  Millis p95_first_audio_ms = 0;
  double fraction_masked = 0.0;
  double threshold_exceeded_rate = 0.0;
};

struct MetricsSnapshot {
  LatencySummary global;
  std::map<std::string, LatencySummary> sessions;
  std::size_t failed_turns = 0;
  std::size_t active_sessions = 0;
};

nlohmann::json to_json(const MetricsSnapshot& m);

/// Nearest-rank percentile of an unsorted sample; 0 for an empty one.
Millis percentile(std::vector<Millis> values, double pct);

/// Thread-safe accumulator of turn reports.
class MetricsAggregator {
 public:
  void record(const std::string& session_id, const TurnReport& report);
  void record_failure();
  MetricsSnapshot snapshot() const;

 private:
  struct Series {
    std::vector<Millis> first_audio;
    std::size_t masked = 0;
    std::size_t exceeded = 0;
  };
  static LatencySummary summarize(const Series& s);

  mutable std::mutex mu_;
  Series global_;
  std::map<std::string, Series> sessions_;
  std::size_t failed_ = 0;
};

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

/// Stage timestamps of one turn, ms since the utterance was received.
struct TurnContext {
  std::string nonce;
  Millis transcript_ready = 0;
  Millis reply_ready = 0;
  std::vector<Millis> synth_start;
  std::vector<Millis> synth_end;
  std::vector<Millis> sent;
};

using MessageSink = std::function<void(const ServerMessage&)>;
/// Runs an admitted turn; the default runs it inline.
using TurnLauncher = std::function<void(std::function<void()>)>;

/// What a turn is predicted to cost under the configured latency models.
struct TurnPlanInput {
  bool audio = true;
  std::string utterance;
  Millis utterance_audio_ms = 0;
  std::string agent_message;
  std::vector<std::string> chunk_texts;
  std::string voice_id;
};

/// The hub: sessions, routing of each utterance through STT, agent,
/// chunker and sequential TTS, and per-turn reports.
///
/// Thread-safe. Messages of one session are processed one turn at a time;
/// an utterance arriving while a turn is running is rejected.
class Gateway {
 public:
  explicit Gateway(GatewayConfig cfg);
  Gateway(GatewayConfig cfg, BackendSet backends);

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Dispatches any client message; all replies go to `sink` in order.
  void handle(const ClientMessage& msg, const MessageSink& sink);
  /// As above, but an admitted utterance runs through `launch`. Admission
  /// (or rejection with turn-in-progress) happens before this returns.
  void handle(const ClientMessage& msg, const MessageSink& sink, const TurnLauncher& launch);
  /// Unframes a binary frame first; framing errors become error messages.
  void handle_frame(std::span<const std::uint8_t> frame, const MessageSink& sink);

  std::vector<ServerMessage> open_session(const ClientMessage& hello);
  void close_session(const std::string& session_id);

  std::optional<SessionState> session_state(const std::string& session_id) const;
  std::optional<TurnContext> last_turn(const std::string& session_id) const;
  MetricsSnapshot metrics_snapshot() const;

  const Catalog& catalog() const { return backends_.catalog; }
  const GatewayConfig& config() const { return cfg_; }

  /// TurnSpec the configured models predict for a turn (builtin backends).
  TurnSpec predicted_spec(const TurnPlanInput& in) const;

 private:
  struct Session {
    std::mutex mu;
    SessionState state;
    std::optional<TurnContext> last_turn;
  };

  std::shared_ptr<Session> find(const std::string& id) const;
  void handle_control(Session& session, const ClientMessage& msg, const MessageSink& sink);
  void handle_utterance(const std::shared_ptr<Session>& session, const ClientMessage& msg,
                        const MessageSink& sink, const TurnLauncher& launch);
  void run_turn(const SessionState& snapshot, const ClientMessage& msg, const MessageSink& sink,
                TurnContext& ctx);

  GatewayConfig cfg_;
  BackendSet backends_;
  MetricsAggregator metrics_;
  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_session_ = 1;
};

}  // namespace voxhub
