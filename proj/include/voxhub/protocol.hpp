#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "voxhub/catalog.hpp"

namespace voxhub {

using Bytes = std::vector<std::uint8_t>;

// ---------------------------------------------------------------------------
// Mock audio
// ---------------------------------------------------------------------------

/// Deterministic stand-in for an audio clip: it carries the spoken text and
/// the duration the clip would have. Silence has empty text and a positive
/// duration.
struct SimAudio {
  std::string voice_id;
  std::string text;
  Millis duration_ms = 0;
  std::uint32_t sample_rate_nominal = 16000;

  bool is_silence() const noexcept { return text.empty(); }
  bool operator==(const SimAudio&) const = default;
};

enum class AudioFormat : std::uint8_t { sima1, opaque };

std::string_view to_string(AudioFormat format);
AudioFormat audio_format_from_string(std::string_view name);

struct AudioEnvelope {
  AudioFormat format = AudioFormat::sima1;
  Bytes payload;

  bool operator==(const AudioEnvelope&) const = default;
};

/// base_ms + ms_per_token * token_count(text).
Millis compute_duration(std::string_view text, const VoiceDescriptor& voice);

/// Throws invalid_input when `text` is blank.
AudioEnvelope encode_sim_audio(std::string_view text, const VoiceDescriptor& voice);
AudioEnvelope encode_silence(const VoiceDescriptor& voice, Millis duration_ms);

/// Serializes an arbitrary SimAudio value in the SIMA1 layout.
Bytes write_sima1(const SimAudio& audio);

/// Throws unsupported_format for OPAQUE envelopes and malformed_payload for
/// anything that is not a complete SIMA1 record.
SimAudio decode_sim_audio(const AudioEnvelope& env);

// ---------------------------------------------------------------------------
// Turn report and session state
// ---------------------------------------------------------------------------

inline constexpr Millis kDefaultThresholdMs = 500;

struct TurnReport {
  Millis stt_ms = 0;
  Millis agent_ms = 0;
  std::vector<Millis> tts_ms_per_chunk;
  std::vector<Millis> chunk_durations_ms;
  Millis first_audio_ms = 0;
  std::vector<Millis> gaps_ms;
  bool masked = true;
  Millis threshold_ms = kDefaultThresholdMs;
  bool threshold_exceeded = false;

  bool operator==(const TurnReport&) const = default;
};

enum class SessionStatus { idle, in_turn, closed };

struct SessionState {
  std::string session_id;
  std::string agent_id;
  std::string voice_id;
  int turn_index = 0;
  SessionStatus status = SessionStatus::idle;
};

// ---------------------------------------------------------------------------
// Messages
// ---------------------------------------------------------------------------

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kDefaultMaxFrameBytes = 4u * 1024u * 1024u;

enum class ClientKind {
  hello,
  select_agent,
  select_voice,
  utterance_audio,
  utterance_text,
  bye
};

enum class ServerKind { session_ack, catalog, transcript, chunk_audio, turn_end, error };

std::string_view to_string(ClientKind kind);
std::string_view to_string(ServerKind kind);

/// Flat record; which fields are meaningful depends on `kind`.
struct ClientMessage {
  ClientKind kind = ClientKind::hello;
  std::string session_id;
  int protocol_version = kProtocolVersion;
  std::string agent_id;
  std::string voice_id;
  std::string text;
  std::string nonce;
  std::optional<AudioEnvelope> audio;

  bool operator==(const ClientMessage&) const = default;

  static ClientMessage hello();
  static ClientMessage select_agent(std::string session, std::string agent);
  static ClientMessage select_voice(std::string session, std::string voice);
  static ClientMessage utterance_text(std::string session, std::string nonce,
                                      std::string text);
  static ClientMessage utterance_audio(std::string session, std::string nonce,
                                       AudioEnvelope audio);
  static ClientMessage bye(std::string session);
};

struct ServerMessage {
  ServerKind kind = ServerKind::error;
  std::string session_id;
  std::string nonce;
  // session_ack
  std::string agent_id;
  std::string voice_id;
  // catalog
  Catalog catalog;
  // transcript: text + stt_ms; chunk_audio: text + seq + duration_ms + audio
  std::string text;
  Millis stt_ms = 0;
  int seq = 0;
  Millis duration_ms = 0;
  std::optional<AudioEnvelope> audio;
  // turn_end
  std::optional<TurnReport> report;
  bool failed = false;
  // error, and turn_end when failed
  std::string code;
  std::string detail;

  bool operator==(const ServerMessage&) const = default;

  static ServerMessage make_error(std::string_view code, std::string detail,
                                  std::string session = {});
};

/// Throws protocol_error when a kind-specific field is missing.
void validate(const ClientMessage& msg);
void validate(const ServerMessage& msg);

// ---------------------------------------------------------------------------
// Framing
//
// frame := u32be header_len | header (JSON text) | u32be payload_len | payload
// The payload is the raw audio envelope bytes (empty when no audio).
// ---------------------------------------------------------------------------

Bytes frame_message(const ClientMessage& msg,
                    std::size_t max_frame_bytes = kDefaultMaxFrameBytes);
Bytes frame_message(const ServerMessage& msg,
                    std::size_t max_frame_bytes = kDefaultMaxFrameBytes);

ClientMessage unframe_client(std::span<const std::uint8_t> frame,
                             std::size_t max_frame_bytes = kDefaultMaxFrameBytes);
ServerMessage unframe_server(std::span<const std::uint8_t> frame,
                             std::size_t max_frame_bytes = kDefaultMaxFrameBytes);

/// Header-only form used for text control frames (no audio section).
std::string to_json_text(const ClientMessage& msg);
std::string to_json_text(const ServerMessage& msg);
ClientMessage client_from_json_text(std::string_view text);
ServerMessage server_from_json_text(std::string_view text);

}  // namespace voxhub
