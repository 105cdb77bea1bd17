#include "voxhub/protocol.hpp"

#include <array>
#include <cstring>

#include "voxhub/error.hpp"
#include "voxhub/json_io.hpp"
#include "voxhub/tokens.hpp"

namespace voxhub {

using nlohmann::json;

namespace {

constexpr std::array<std::uint8_t, 4> kSimaMagic{'S', 'I', 'M', 'A'};
constexpr std::uint8_t kSimaVersion = 0x01;

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_bytes(Bytes& out, std::string_view s) { out.insert(out.end(), s.begin(), s.end()); }

/// Bounds-checked big-endian reader; every overrun is reported with `code`.
class Reader {
 public:
  Reader(std::span<const std::uint8_t> data, ErrorCode code) : data_(data), code_(code) {}

  std::uint8_t u8() { return need(1)[0]; }
  std::uint16_t u16() {
    auto p = need(2);
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
  }
  std::uint32_t u32() {
    auto p = need(4);
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
           std::uint32_t{p[3]};
  }
  std::string str(std::size_t n) {
    auto p = need(n);
    return std::string(reinterpret_cast<const char*>(p.data()), n);
  }
  Bytes bytes(std::size_t n) {
    auto p = need(n);
    return Bytes(p.begin(), p.end());
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::span<const std::uint8_t> need(std::size_t n) {
    if (data_.size() - pos_ < n) throw Error(code_, "truncated input");
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::span<const std::uint8_t> data_;
  ErrorCode code_;
  std::size_t pos_ = 0;
};

[[noreturn]] void protocol_fail(const std::string& detail) {
  throw Error(ErrorCode::protocol_error, detail);
}

template <typename Kind, std::size_t N>
Kind kind_from(std::string_view name, const std::array<Kind, N>& all) {
  for (Kind k : all)
    if (to_string(k) == name) return k;
  protocol_fail("unknown message kind '" + std::string(name) + "'");
}

constexpr std::array kClientKinds{ClientKind::hello,          ClientKind::select_agent,
                                  ClientKind::select_voice,   ClientKind::utterance_audio,
                                  ClientKind::utterance_text, ClientKind::bye};
constexpr std::array kServerKinds{ServerKind::session_ack, ServerKind::catalog,
                                  ServerKind::transcript,  ServerKind::chunk_audio,
                                  ServerKind::turn_end,    ServerKind::error};

std::string get_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) protocol_fail(std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

template <typename T>
T get_number(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number_integer()) protocol_fail(std::string("missing integer field '") + key + "'");
  return it->get<T>();
}

json header_of(const ClientMessage& m) {
  json j{{"kind", to_string(m.kind)}};
  switch (m.kind) {
    case ClientKind::hello: j["protocol_version"] = m.protocol_version; break;
    case ClientKind::select_agent: j["agent_id"] = m.agent_id; break;
    case ClientKind::select_voice: j["voice_id"] = m.voice_id; break;
    case ClientKind::utterance_text:
      j["nonce"] = m.nonce;
      j["text"] = m.text;
      break;
    case ClientKind::utterance_audio:
      j["nonce"] = m.nonce;
      j["audio_format"] = to_string(m.audio->format);
      break;
    case ClientKind::bye: break;
  }
  if (m.kind != ClientKind::hello) j["session_id"] = m.session_id;
  return j;
}

ClientMessage client_from_header(const json& j) {
  if (!j.is_object()) protocol_fail("frame header is not an object");
  ClientMessage m;
  m.kind = kind_from(get_string(j, "kind"), kClientKinds);
  if (m.kind != ClientKind::hello) m.session_id = get_string(j, "session_id");
  switch (m.kind) {
    case ClientKind::hello: m.protocol_version = get_number<int>(j, "protocol_version"); break;
    case ClientKind::select_agent: m.agent_id = get_string(j, "agent_id"); break;
    case ClientKind::select_voice: m.voice_id = get_string(j, "voice_id"); break;
    case ClientKind::utterance_text:
      m.nonce = get_string(j, "nonce");
      m.text = get_string(j, "text");
      break;
    case ClientKind::utterance_audio:
      m.nonce = get_string(j, "nonce");
      m.audio = AudioEnvelope{audio_format_from_string(get_string(j, "audio_format")), {}};
      break;
    case ClientKind::bye: break;
  }
  return m;
}

json header_of(const ServerMessage& m) {
  json j{{"kind", to_string(m.kind)}, {"session_id", m.session_id}};
  switch (m.kind) {
    case ServerKind::session_ack:
      j["agent_id"] = m.agent_id;
      j["voice_id"] = m.voice_id;
      break;
    case ServerKind::catalog:
      j["agents"] = m.catalog.agents;
      j["voices"] = m.catalog.voices;
      break;
    case ServerKind::transcript:
      j["nonce"] = m.nonce;
      j["text"] = m.text;
      j["stt_ms"] = m.stt_ms;
      break;
    case ServerKind::chunk_audio:
      j["nonce"] = m.nonce;
      j["seq"] = m.seq;
      j["text"] = m.text;
      j["duration_ms"] = m.duration_ms;
      j["audio_format"] = to_string(m.audio->format);
      break;
    case ServerKind::turn_end:
      j["nonce"] = m.nonce;
      j["failed"] = m.failed;
      j["report"] = m.report ? json(*m.report) : json(nullptr);
      if (m.failed) {
        j["code"] = m.code;
        j["detail"] = m.detail;
      }
      break;
    case ServerKind::error:
      j["code"] = m.code;
      j["detail"] = m.detail;
      break;
  }
  return j;
}

ServerMessage server_from_header(const json& j) {
  if (!j.is_object()) protocol_fail("frame header is not an object");
  ServerMessage m;
  m.kind = kind_from(get_string(j, "kind"), kServerKinds);
  m.session_id = get_string(j, "session_id");
  try {
    switch (m.kind) {
      case ServerKind::session_ack:
        m.agent_id = get_string(j, "agent_id");
        m.voice_id = get_string(j, "voice_id");
        break;
      case ServerKind::catalog:
        m.catalog.agents = j.at("agents").get<std::vector<AgentDescriptor>>();
        m.catalog.voices = j.at("voices").get<std::vector<VoiceDescriptor>>();
        break;
      case ServerKind::transcript:
        m.nonce = get_string(j, "nonce");
        m.text = get_string(j, "text");
        m.stt_ms = get_number<Millis>(j, "stt_ms");
        break;
      case ServerKind::chunk_audio:
        m.nonce = get_string(j, "nonce");
        m.seq = get_number<int>(j, "seq");
        m.text = get_string(j, "text");
        m.duration_ms = get_number<Millis>(j, "duration_ms");
        m.audio = AudioEnvelope{audio_format_from_string(get_string(j, "audio_format")), {}};
        break;
      case ServerKind::turn_end:
        m.nonce = get_string(j, "nonce");
        m.failed = j.at("failed").get<bool>();
        if (!j.at("report").is_null()) m.report = j.at("report").get<TurnReport>();
        if (m.failed) {
          m.code = get_string(j, "code");
          m.detail = get_string(j, "detail");
        }
        break;
      case ServerKind::error:
        m.code = get_string(j, "code");
        m.detail = get_string(j, "detail");
        break;
    }
  } catch (const json::exception& e) {
    protocol_fail(e.what());
  }
  return m;
}

template <typename Msg>
Bytes frame_impl(const Msg& msg, std::size_t max_frame_bytes) {
  validate(msg);
  std::string header = header_of(msg).dump();
  const Bytes* payload = msg.audio ? &msg.audio->payload : nullptr;
  std::size_t payload_size = payload ? payload->size() : 0;
  std::size_t total = 8 + header.size() + payload_size;
  if (total > max_frame_bytes)
    throw Error(ErrorCode::frame_too_large,
                "frame of " + std::to_string(total) + " bytes exceeds " + std::to_string(max_frame_bytes));
  Bytes out;
  out.reserve(total);
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  put_bytes(out, header);
  put_u32(out, static_cast<std::uint32_t>(payload_size));
  if (payload) out.insert(out.end(), payload->begin(), payload->end());
  return out;
}

template <typename Msg, typename FromHeader>
Msg unframe_impl(std::span<const std::uint8_t> frame, std::size_t max_frame_bytes, FromHeader from_header) {
  if (frame.size() > max_frame_bytes)
    throw Error(ErrorCode::frame_too_large,
                "frame of " + std::to_string(frame.size()) + " bytes exceeds " + std::to_string(max_frame_bytes));
  Reader in(frame, ErrorCode::protocol_error);
  std::string header = in.str(in.u32());
  Bytes payload = in.bytes(in.u32());
  if (!in.done()) protocol_fail("trailing bytes after frame");
  json j = json::parse(header, nullptr, false);
  if (j.is_discarded()) protocol_fail("frame header is not valid JSON");
  Msg msg = from_header(j);
  if (msg.audio) {
    msg.audio->payload = std::move(payload);
  } else if (!payload.empty()) {
    protocol_fail("unexpected audio section");
  }
  validate(msg);
  return msg;
}

}  // namespace

std::string_view to_string(AudioFormat format) {
  return format == AudioFormat::sima1 ? "SIMA1" : "OPAQUE";
}

AudioFormat audio_format_from_string(std::string_view name) {
  if (name == "SIMA1") return AudioFormat::sima1;
  if (name == "OPAQUE") return AudioFormat::opaque;
  throw Error(ErrorCode::unsupported_format, "unknown audio format '" + std::string(name) + "'");
}

Millis compute_duration(std::string_view text, const VoiceDescriptor& voice) {
  return voice.base_ms + voice.ms_per_token * static_cast<Millis>(token_count(text));
}

Bytes write_sima1(const SimAudio& audio) {
  if (audio.voice_id.size() > 0xFFFF)
    throw Error(ErrorCode::invalid_input, "voice id too long");
  if (audio.duration_ms < 0 || audio.duration_ms > 0xFFFFFFFFLL)
    throw Error(ErrorCode::invalid_input, "duration out of range");
  if (audio.text.size() > 0xFFFFFFFFULL) throw Error(ErrorCode::invalid_input, "text too long");
  Bytes out;
  out.reserve(4 + 1 + 2 + audio.voice_id.size() + 12 + audio.text.size());
  out.insert(out.end(), kSimaMagic.begin(), kSimaMagic.end());
  out.push_back(kSimaVersion);
  put_u16(out, static_cast<std::uint16_t>(audio.voice_id.size()));
  put_bytes(out, audio.voice_id);
  put_u32(out, static_cast<std::uint32_t>(audio.duration_ms));
  put_u32(out, audio.sample_rate_nominal);
  put_u32(out, static_cast<std::uint32_t>(audio.text.size()));
  put_bytes(out, audio.text);
  return out;
}

AudioEnvelope encode_sim_audio(std::string_view text, const VoiceDescriptor& voice) {
  if (token_count(text) == 0) throw Error(ErrorCode::invalid_input, "cannot encode empty text");
  SimAudio audio{voice.voice_id, std::string(text), compute_duration(text, voice)};
  return AudioEnvelope{AudioFormat::sima1, write_sima1(audio)};
}

AudioEnvelope encode_silence(const VoiceDescriptor& voice, Millis duration_ms) {
  if (duration_ms <= 0) throw Error(ErrorCode::invalid_input, "silence needs a positive duration");
  return AudioEnvelope{AudioFormat::sima1, write_sima1(SimAudio{voice.voice_id, "", duration_ms})};
}

SimAudio decode_sim_audio(const AudioEnvelope& env) {
  if (env.format != AudioFormat::sima1)
    throw Error(ErrorCode::unsupported_format, "envelope is not SIMA1");
  Reader in(env.payload, ErrorCode::malformed_payload);
  for (std::uint8_t expected : kSimaMagic)
    if (in.u8() != expected) throw Error(ErrorCode::malformed_payload, "bad SIMA1 magic");
  if (in.u8() != kSimaVersion) throw Error(ErrorCode::malformed_payload, "unsupported SIMA1 version");
  SimAudio audio;
  audio.voice_id = in.str(in.u16());
  audio.duration_ms = in.u32();
  audio.sample_rate_nominal = in.u32();
  audio.text = in.str(in.u32());
  if (!in.done()) throw Error(ErrorCode::malformed_payload, "trailing bytes after SIMA1 record");
  if (audio.text.empty() && audio.duration_ms == 0)
    throw Error(ErrorCode::malformed_payload, "empty clip without silence duration");
  return audio;
}

std::string_view to_string(ClientKind kind) {
  switch (kind) {
    case ClientKind::hello: return "hello";
    case ClientKind::select_agent: return "select_agent";
    case ClientKind::select_voice: return "select_voice";
    case ClientKind::utterance_audio: return "utterance_audio";
    case ClientKind::utterance_text: return "utterance_text";
    case ClientKind::bye: return "bye";
  }
  return "?";
}

std::string_view to_string(ServerKind kind) {
  switch (kind) {
    case ServerKind::session_ack: return "session_ack";
    case ServerKind::catalog: return "catalog";
    case ServerKind::transcript: return "transcript";
    case ServerKind::chunk_audio: return "chunk_audio";
    case ServerKind::turn_end: return "turn_end";
    case ServerKind::error: return "error";
  }
  return "?";
}

ClientMessage ClientMessage::hello() { return ClientMessage{}; }

ClientMessage ClientMessage::select_agent(std::string session, std::string agent) {
  ClientMessage m;
  m.kind = ClientKind::select_agent;
  m.session_id = std::move(session);
  m.agent_id = std::move(agent);
  return m;
}

ClientMessage ClientMessage::select_voice(std::string session, std::string voice) {
  ClientMessage m;
  m.kind = ClientKind::select_voice;
  m.session_id = std::move(session);
  m.voice_id = std::move(voice);
  return m;
}

ClientMessage ClientMessage::utterance_text(std::string session, std::string nonce, std::string text) {
  ClientMessage m;
  m.kind = ClientKind::utterance_text;
  m.session_id = std::move(session);
  m.nonce = std::move(nonce);
  m.text = std::move(text);
  return m;
}

ClientMessage ClientMessage::utterance_audio(std::string session, std::string nonce, AudioEnvelope audio) {
  ClientMessage m;
  m.kind = ClientKind::utterance_audio;
  m.session_id = std::move(session);
  m.nonce = std::move(nonce);
  m.audio = std::move(audio);
  return m;
}

ClientMessage ClientMessage::bye(std::string session) {
  ClientMessage m;
  m.kind = ClientKind::bye;
  m.session_id = std::move(session);
  return m;
}

ServerMessage ServerMessage::make_error(std::string_view code, std::string detail, std::string session) {
  ServerMessage m;
  m.kind = ServerKind::error;
  m.session_id = std::move(session);
  m.code = std::string(code);
  m.detail = std::move(detail);
  return m;
}

void validate(const ClientMessage& m) {
  bool needs_session = m.kind != ClientKind::hello;
  if (needs_session && m.session_id.empty()) protocol_fail("missing session_id");
  switch (m.kind) {
    case ClientKind::select_agent:
      if (m.agent_id.empty()) protocol_fail("select_agent without agent_id");
      break;
    case ClientKind::select_voice:
      if (m.voice_id.empty()) protocol_fail("select_voice without voice_id");
      break;
    case ClientKind::utterance_text:
      if (m.nonce.empty()) protocol_fail("utterance without nonce");
      break;
    case ClientKind::utterance_audio:
      if (m.nonce.empty()) protocol_fail("utterance without nonce");
      if (!m.audio) protocol_fail("utterance_audio without audio");
      break;
    case ClientKind::hello:
    case ClientKind::bye: break;
  }
  if (m.audio && m.kind != ClientKind::utterance_audio) protocol_fail("audio on a non-audio message");
}

void validate(const ServerMessage& m) {
  switch (m.kind) {
    case ServerKind::chunk_audio:
      if (!m.audio) protocol_fail("chunk_audio without audio");
      if (m.seq < 1) protocol_fail("chunk_audio seq must start at 1");
      break;
    case ServerKind::turn_end:
      if (!m.failed && !m.report) protocol_fail("turn_end without report");
      break;
    case ServerKind::error:
      if (m.code.empty()) protocol_fail("error without code");
      break;
    default: break;
  }
  if (m.audio && m.kind != ServerKind::chunk_audio) protocol_fail("audio on a non-audio message");
}

Bytes frame_message(const ClientMessage& msg, std::size_t max_frame_bytes) {
  return frame_impl(msg, max_frame_bytes);
}

Bytes frame_message(const ServerMessage& msg, std::size_t max_frame_bytes) {
  return frame_impl(msg, max_frame_bytes);
}

ClientMessage unframe_client(std::span<const std::uint8_t> frame, std::size_t max_frame_bytes) {
  return unframe_impl<ClientMessage>(frame, max_frame_bytes,
                                     [](const json& j) { return client_from_header(j); });
}

ServerMessage unframe_server(std::span<const std::uint8_t> frame, std::size_t max_frame_bytes) {
  return unframe_impl<ServerMessage>(frame, max_frame_bytes,
                                     [](const json& j) { return server_from_header(j); });
}

std::string to_json_text(const ClientMessage& msg) {
  validate(msg);
  if (msg.audio) protocol_fail("audio messages need a binary frame");
  return header_of(msg).dump();
}

std::string to_json_text(const ServerMessage& msg) {
  validate(msg);
  if (msg.audio) protocol_fail("audio messages need a binary frame");
  return header_of(msg).dump();
}

ClientMessage client_from_json_text(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) protocol_fail("control frame is not valid JSON");
  ClientMessage m = client_from_header(j);
  if (m.audio) protocol_fail("audio messages need a binary frame");
  validate(m);
  return m;
}

ServerMessage server_from_json_text(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) protocol_fail("control frame is not valid JSON");
  ServerMessage m = server_from_header(j);
  if (m.audio) protocol_fail("audio messages need a binary frame");
  validate(m);
  return m;
}

// json_io

void to_json(json& j, const VoiceDescriptor& v) {
  j = json{{"voice_id", v.voice_id},
           {"display_name", v.display_name},
           {"ms_per_token", v.ms_per_token},
           {"base_ms", v.base_ms}};
}

void from_json(const json& j, VoiceDescriptor& v) {
  v.voice_id = j.at("voice_id").get<std::string>();
  v.display_name = j.value("display_name", v.voice_id);
  v.ms_per_token = j.value("ms_per_token", Millis{400});
  v.base_ms = j.value("base_ms", Millis{120});
}

void to_json(json& j, const AgentDescriptor& a) {
  j = json{{"agent_id", a.agent_id}, {"display_name", a.display_name}, {"endpoint", a.endpoint}};
}

void from_json(const json& j, AgentDescriptor& a) {
  a.agent_id = j.at("agent_id").get<std::string>();
  a.display_name = j.value("display_name", a.agent_id);
  a.endpoint = j.value("endpoint", "builtin:" + a.agent_id);
}

void to_json(json& j, const TurnReport& r) {
  j = json{{"stt_ms", r.stt_ms},
           {"agent_ms", r.agent_ms},
           {"tts_ms_per_chunk", r.tts_ms_per_chunk},
           {"chunk_durations_ms", r.chunk_durations_ms},
           {"first_audio_ms", r.first_audio_ms},
           {"gaps_ms", r.gaps_ms},
           {"masked", r.masked},
           {"threshold_ms", r.threshold_ms},
           {"threshold_exceeded", r.threshold_exceeded}};
}

void from_json(const json& j, TurnReport& r) {
  j.at("stt_ms").get_to(r.stt_ms);
  j.at("agent_ms").get_to(r.agent_ms);
  j.at("tts_ms_per_chunk").get_to(r.tts_ms_per_chunk);
  j.at("chunk_durations_ms").get_to(r.chunk_durations_ms);
  j.at("first_audio_ms").get_to(r.first_audio_ms);
  j.at("gaps_ms").get_to(r.gaps_ms);
  j.at("masked").get_to(r.masked);
  j.at("threshold_ms").get_to(r.threshold_ms);
  j.at("threshold_exceeded").get_to(r.threshold_exceeded);
}

}  // namespace voxhub
