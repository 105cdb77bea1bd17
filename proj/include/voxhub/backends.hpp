#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "voxhub/agents.hpp"
#include "voxhub/catalog.hpp"
#include "voxhub/latency_model.hpp"
#include "voxhub/protocol.hpp"

namespace voxhub {

/// wallclock: mocks sleep for their processing time. simulated: mocks only
/// report it and the gateway advances a virtual clock instead.
enum class TimeMode { wallclock, simulated };

std::string_view to_string(TimeMode mode);
TimeMode time_mode_from_string(std::string_view name);

inline constexpr std::chrono::milliseconds kDefaultBackendTimeout{10000};

struct Transcription {
  std::string text;
  Millis processing_ms = 0;

  bool empty_transcript() const noexcept;
};

struct Synthesis {
  AudioEnvelope env;
  Millis processing_ms = 0;
  Millis duration_ms = 0;
};

struct AgentReply {
  std::vector<std::string> replies;
  Millis processing_ms = 0;
};

class SpeechToText {
 public:
  virtual ~SpeechToText() = default;
  virtual Transcription transcribe(const AudioEnvelope& env) = 0;
};

class TextToSpeech {
 public:
  virtual ~TextToSpeech() = default;
  virtual Synthesis synthesize(std::string_view text, const std::string& voice_id) = 0;
  virtual std::vector<VoiceDescriptor> voices() = 0;
};

/// Reply-webhook shape: a sender and a message in, a list of texts out.
class ConversationalAgent {
 public:
  virtual ~ConversationalAgent() = default;
  virtual AgentReply respond(const std::string& sender_id, std::string_view message) = 0;
};

// ---------------------------------------------------------------------------
// Mocks
// ---------------------------------------------------------------------------

void sleep_for_processing(Millis ms);

/// Decodes SIMA1 and returns the embedded text.
class MockSpeechToText final : public SpeechToText {
 public:
  MockSpeechToText(LatencyModel model, TimeMode mode);
  Transcription transcribe(const AudioEnvelope& env) override;

 private:
  LatencyModel model_;
  TimeMode mode_;
};

/// Encodes SIMA1 clips for the configured voices. `max_concurrent` bounds
/// simultaneous jobs across all sessions (0 = unlimited).
class MockTextToSpeech final : public TextToSpeech {
 public:
  MockTextToSpeech(std::vector<VoiceDescriptor> voices, LatencyModel model, TimeMode mode,
                   std::size_t max_concurrent = 0);
  Synthesis synthesize(std::string_view text, const std::string& voice_id) override;
  std::vector<VoiceDescriptor> voices() override { return voices_; }

 private:
  std::vector<VoiceDescriptor> voices_;
  LatencyModel model_;
  TimeMode mode_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
};

/// Scripted in-process agents with one dialogue state per sender.
class BuiltinAgent final : public ConversationalAgent {
 public:
  enum class Kind { triage, anamnesis, echo };

  BuiltinAgent(Kind kind, LatencyModel model, TimeMode mode);

  /// Accepts "triage", "anamnesis", "echo" with or without "builtin:".
  static std::unique_ptr<BuiltinAgent> make(std::string_view name, LatencyModel model, TimeMode mode);

  AgentReply respond(const std::string& sender_id, std::string_view message) override;
  void forget(const std::string& sender_id);

 private:
  std::vector<std::string> step(const std::string& sender_id, std::string_view message);

  Kind kind_;
  LatencyModel model_;
  TimeMode mode_;
  std::mutex mu_;
  std::map<std::string, agents::TriageState> triage_;
  std::map<std::string, agents::AnamnesisState> anamnesis_;
};

// ---------------------------------------------------------------------------
// Remote clients for the HTTP backend protocol
// ---------------------------------------------------------------------------

/// POST {base}/v1/transcribe with the raw envelope and X-Audio-Format.
class HttpSpeechToText final : public SpeechToText {
 public:
  explicit HttpSpeechToText(std::string base_url,
                            std::chrono::milliseconds timeout = kDefaultBackendTimeout);
  Transcription transcribe(const AudioEnvelope& env) override;

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

/// POST {base}/v1/synthesize, GET {base}/v1/voices.
class HttpTextToSpeech final : public TextToSpeech {
 public:
  explicit HttpTextToSpeech(std::string base_url,
                            std::chrono::milliseconds timeout = kDefaultBackendTimeout);
  Synthesis synthesize(std::string_view text, const std::string& voice_id) override;
  std::vector<VoiceDescriptor> voices() override;

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

/// POSTs {"sender_id", "message"} to the endpoint URL; a URL without a path
/// gets "/v1/respond". processing_ms is the measured round trip.
class HttpAgent final : public ConversationalAgent {
 public:
  explicit HttpAgent(std::string endpoint, std::chrono::milliseconds timeout = kDefaultBackendTimeout);
  AgentReply respond(const std::string& sender_id, std::string_view message) override;

 private:
  std::string endpoint_;
  std::chrono::milliseconds timeout_;
};

// ---------------------------------------------------------------------------
// Routing
// ---------------------------------------------------------------------------

/// Maps agent ids to agent implementations.
class AgentRouter {
 public:
  void add(const std::string& agent_id, std::shared_ptr<ConversationalAgent> agent);
  /// Throws unknown_agent for ids that were never added.
  AgentReply respond(const std::string& agent_id, const std::string& sender_id, std::string_view message) const;
  std::shared_ptr<ConversationalAgent> find(const std::string& agent_id) const;

 private:
  std::map<std::string, std::shared_ptr<ConversationalAgent>> agents_;
};

struct BackendSet {
  std::shared_ptr<SpeechToText> stt;
  std::shared_ptr<TextToSpeech> tts;
  AgentRouter agents;
  Catalog catalog;

  /// Stable: sorted by id.
  const Catalog& list_catalog() const { return catalog; }
};

}  // namespace voxhub
