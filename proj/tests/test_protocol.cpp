#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "voxhub/error.hpp"
#include "voxhub/protocol.hpp"

using namespace voxhub;

namespace {

VoiceDescriptor voice(Millis ms_per_token, Millis base_ms, std::string id = "f1") {
  return VoiceDescriptor{std::move(id), "test", ms_per_token, base_ms};
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::invalid_input;
}

std::string random_text(std::mt19937& rng, std::size_t max_words) {
  static const char* words[] = {"hello", "pain", "chest,", "yes.", "ok?!", "\xc3\xa8", "seven", "x"};
  std::uniform_int_distribution<std::size_t> n(1, max_words), w(0, 7);
  std::string out;
  for (std::size_t i = 0, k = n(rng); i < k; ++i) out += std::string(i ? " " : "") + words[w(rng)];
  return out;
}

}  // namespace

TEST_CASE("compute_duration is linear in whitespace tokens") {
  CHECK(compute_duration("one two three", voice(400, 0)) == 1200);
  CHECK(compute_duration("", voice(400, 120)) == 120);
  CHECK(compute_duration("hi, there.", voice(400, 0)) == 800);
}

TEST_CASE("encode_sim_audio embeds the computed duration") {
  SimAudio a = decode_sim_audio(encode_sim_audio("hello there", voice(400, 0)));
  CHECK(a.duration_ms == 800);
  CHECK(a.text == "hello there");
  CHECK(a.voice_id == "f1");
  CHECK(a.sample_rate_nominal == 16000);
  CHECK(decode_sim_audio(encode_sim_audio("a", voice(400, 100))).duration_ms == 500);
  CHECK(code_of([] { encode_sim_audio("", voice(400, 0)); }) == ErrorCode::invalid_input);
  CHECK(code_of([] { encode_sim_audio("  \t ", voice(400, 0)); }) == ErrorCode::invalid_input);
}

TEST_CASE("SIMA1 layout is bit-exact") {
  AudioEnvelope env = encode_sim_audio("hi yo", voice(400, 120, "m1"));
  const Bytes expected{'S', 'I', 'M', 'A', 0x01,                // magic, version
                       0x00, 0x02, 'm', '1',                    // voice id
                       0x00, 0x00, 0x03, 0x98,                  // 920 ms
                       0x00, 0x00, 0x3E, 0x80,                  // 16000 Hz
                       0x00, 0x00, 0x00, 0x05, 'h', 'i', ' ', 'y', 'o'};
  CHECK(env.format == AudioFormat::sima1);
  CHECK(env.payload == expected);
}

TEST_CASE("decode_sim_audio rejects bad envelopes") {
  AudioEnvelope env = encode_sim_audio("hello there", voice(400, 0));
  SUBCASE("truncated") {
    for (std::size_t cut = 0; cut < env.payload.size(); ++cut) {
      AudioEnvelope t{AudioFormat::sima1, Bytes(env.payload.begin(), env.payload.begin() + cut)};
      CHECK(code_of([&] { decode_sim_audio(t); }) == ErrorCode::malformed_payload);
    }
  }
  SUBCASE("bad magic") {
    env.payload[0] = 'X';
    CHECK(code_of([&] { decode_sim_audio(env); }) == ErrorCode::malformed_payload);
  }
  SUBCASE("trailing bytes") {
    env.payload.push_back(0);
    CHECK(code_of([&] { decode_sim_audio(env); }) == ErrorCode::malformed_payload);
  }
  SUBCASE("opaque") {
    AudioEnvelope opaque{AudioFormat::opaque, {1, 2, 3}};
    CHECK(code_of([&] { decode_sim_audio(opaque); }) == ErrorCode::unsupported_format);
  }
}

TEST_CASE("silence carries a duration and no text") {
  SimAudio s = decode_sim_audio(encode_silence(voice(400, 0), 700));
  CHECK(s.is_silence());
  CHECK(s.duration_ms == 700);
}

TEST_CASE("property: codec round trip reproduces text, voice and duration") {
  std::mt19937 rng(7);
  for (int i = 0; i < 500; ++i) {
    std::string text = random_text(rng, 30);
    VoiceDescriptor v = voice(rng() % 800, rng() % 300, "v" + std::to_string(rng() % 100));
    SimAudio a = decode_sim_audio(encode_sim_audio(text, v));
    CHECK(a.text == text);
    CHECK(a.voice_id == v.voice_id);
    CHECK(a.duration_ms == compute_duration(text, v));
    CHECK(write_sima1(a) == encode_sim_audio(text, v).payload);
  }
}

TEST_CASE("framing round trips every message kind") {
  AudioEnvelope audio = encode_sim_audio("hello there", voice(400, 120));
  std::vector<ClientMessage> client{
      ClientMessage::hello(),
      ClientMessage::select_agent("s1", "triage"),
      ClientMessage::select_voice("s1", "m1"),
      ClientMessage::utterance_text("s1", "n1", "i have chest pain"),
      ClientMessage::utterance_audio("s1", "n2", audio),
      ClientMessage::utterance_audio("s1", "n3", AudioEnvelope{AudioFormat::opaque, Bytes(1000, 0xAB)}),
      ClientMessage::bye("s1"),
  };
  for (const auto& m : client) {
    CAPTURE(to_string(m.kind));
    CHECK(unframe_client(frame_message(m)) == m);
  }

  TurnReport report{800, 100, {1700, 1700}, {2000, 2000}, 2600, {0}, true, 500, true};
  std::vector<ServerMessage> server(7);
  server[0].kind = ServerKind::session_ack;
  server[0].agent_id = "anamnesis";
  server[0].voice_id = "f1";
  server[1].kind = ServerKind::catalog;
  server[1].catalog = Catalog{{{"triage", "Triage", "builtin:triage"}}, {voice(400, 120)}};
  server[2].kind = ServerKind::transcript;
  server[2].nonce = "n1";
  server[2].text = "hello";
  server[2].stt_ms = 800;
  server[3].kind = ServerKind::chunk_audio;
  server[3].nonce = "n1";
  server[3].seq = 1;
  server[3].text = "hello there";
  server[3].duration_ms = 920;
  server[3].audio = audio;
  server[4].kind = ServerKind::turn_end;
  server[4].nonce = "n1";
  server[4].report = report;
  server[5].kind = ServerKind::turn_end;
  server[5].nonce = "n2";
  server[5].failed = true;
  server[5].code = "backend-unavailable";
  server[5].detail = "tts down";
  server[6] = ServerMessage::make_error("busy", "full");
  for (auto& m : server) {
    m.session_id = "s1";
    CAPTURE(to_string(m.kind));
    CHECK(unframe_server(frame_message(m)) == m);
    if (!m.audio) CHECK(server_from_json_text(to_json_text(m)) == m);
  }
}

TEST_CASE("audio rides as a raw binary section") {
  Bytes payload(256);
  for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<std::uint8_t>(i);
  ClientMessage m = ClientMessage::utterance_audio("s1", "n", AudioEnvelope{AudioFormat::opaque, payload});
  Bytes frame = frame_message(m);
  CHECK(std::search(frame.begin(), frame.end(), payload.begin(), payload.end()) != frame.end());
  CHECK(frame.size() < 8 + 200 + payload.size());
}

TEST_CASE("frame size limit") {
  ClientMessage big = ClientMessage::utterance_audio(
      "s1", "n", AudioEnvelope{AudioFormat::opaque, Bytes(5u * 1024u * 1024u, 1)});
  CHECK(code_of([&] { frame_message(big); }) == ErrorCode::frame_too_large);
  Bytes frame = frame_message(big, 6u * 1024u * 1024u);
  CHECK(code_of([&] { unframe_client(frame); }) == ErrorCode::frame_too_large);

  // Largest payload that still fits the default limit.
  ClientMessage edge = ClientMessage::utterance_audio("s1", "n", AudioEnvelope{AudioFormat::opaque, {}});
  std::size_t overhead = frame_message(edge).size();
  edge.audio->payload.assign(kDefaultMaxFrameBytes - overhead, 7);
  Bytes max_frame = frame_message(edge);
  CHECK(max_frame.size() == kDefaultMaxFrameBytes);
  CHECK(unframe_client(max_frame) == edge);
  edge.audio->payload.push_back(7);
  CHECK(code_of([&] { frame_message(edge); }) == ErrorCode::frame_too_large);
}

TEST_CASE("protocol errors") {
  CHECK(code_of([] { client_from_json_text(R"({"kind":"foo","session_id":"s1"})"); }) ==
        ErrorCode::protocol_error);
  CHECK(code_of([] { client_from_json_text("not json"); }) == ErrorCode::protocol_error);
  CHECK(code_of([] { client_from_json_text(R"({"kind":"select_agent","session_id":"s1"})"); }) ==
        ErrorCode::protocol_error);
  CHECK(code_of([] { frame_message(ClientMessage::utterance_text("s1", "", "hi")); }) ==
        ErrorCode::protocol_error);
  Bytes truncated = frame_message(ClientMessage::bye("s1"));
  truncated.pop_back();
  CHECK(code_of([&] { unframe_client(truncated); }) == ErrorCode::protocol_error);
  ServerMessage chunk;
  chunk.kind = ServerKind::chunk_audio;
  chunk.seq = 0;
  chunk.audio = AudioEnvelope{};
  CHECK(code_of([&] { frame_message(chunk); }) == ErrorCode::protocol_error);
}
