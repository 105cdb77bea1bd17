#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <random>
#include <thread>

#include "voxhub/backend_server.hpp"
#include "voxhub/backends.hpp"
#include "voxhub/error.hpp"
#include "voxhub/gateway.hpp"

using namespace voxhub;
using namespace std::chrono_literals;

namespace {

const VoiceDescriptor kF1{"f1", "Female 1", 400, 120};
const VoiceDescriptor kM1{"m1", "Male 1", 400, 120};

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::invalid_input;
}

MockTextToSpeech mock_tts(double rtf = kDefaultTtsRtf) {
  return MockTextToSpeech({kF1, kM1}, LatencyModel::proportional(rtf), TimeMode::simulated);
}

}  // namespace

TEST_CASE("latency models") {
  CHECK(LatencyModel::fixed(800).evaluate(99, 99) == 800);
  CHECK(LatencyModel::per_token(100, 10).evaluate(5, 0) == 150);
  CHECK(LatencyModel::proportional(0.85).evaluate(0, 1720) == 1462);
  CHECK(LatencyModel::proportional(0.85).evaluate(0, 4920) == 4182);
  CHECK(LatencyModel::proportional(0).evaluate(3, 5000) == 0);

  LatencyModel jitter = LatencyModel::fixed(100);
  jitter.jitter_ms = 50;
  jitter.seed = 42;
  bool varied = false;
  for (std::size_t tokens = 0; tokens < 200; ++tokens) {
    Millis v = jitter.evaluate(tokens, 1000);
    CHECK(v == jitter.evaluate(tokens, 1000));
    CHECK(v >= 100);
    CHECK(v <= 150);
    varied = varied || v != jitter.evaluate(0, 1000);
  }
  CHECK(varied);
  LatencyModel reseeded = jitter;
  reseeded.seed = 43;
  bool differs = false;
  for (std::size_t tokens = 0; tokens < 50; ++tokens)
    differs = differs || reseeded.evaluate(tokens, 1000) != jitter.evaluate(tokens, 1000);
  CHECK(differs);

  LatencyModel bad = LatencyModel::fixed(-1);
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::config_error);
  LatencyModel mixed = LatencyModel::fixed(10);
  mixed.rtf = 0.5;
  CHECK(code_of([&] { mixed.validate(); }) == ErrorCode::config_error);
}

TEST_CASE("mock transcribe") {
  MockSpeechToText stt(default_stt_model(), TimeMode::simulated);
  Transcription t = stt.transcribe(encode_sim_audio("i have chest pain", kF1));
  CHECK(t.text == "i have chest pain");
  CHECK(t.processing_ms == 800);
  CHECK_FALSE(t.empty_transcript());

  Transcription silence = stt.transcribe(encode_silence(kF1, 900));
  CHECK(silence.text.empty());
  CHECK(silence.processing_ms == 800);
  CHECK(silence.empty_transcript());

  CHECK(code_of([&] { stt.transcribe(AudioEnvelope{AudioFormat::sima1, {1, 2, 3}}); }) ==
        ErrorCode::transcription_failed);
  CHECK(code_of([&] { stt.transcribe(AudioEnvelope{AudioFormat::opaque, {1, 2, 3}}); }) ==
        ErrorCode::transcription_failed);
}

TEST_CASE("mock synthesize") {
  MockTextToSpeech tts = mock_tts();
  Synthesis s = tts.synthesize("How are you today?", "f1");
  CHECK(s.duration_ms == 1720);
  CHECK(s.processing_ms == 1462);
  CHECK(s.env == encode_sim_audio("How are you today?", kF1));

  CHECK(mock_tts(0).synthesize("How are you today?", "m1").processing_ms == 0);
  CHECK(code_of([&] { tts.synthesize("hello", "vx"); }) == ErrorCode::unknown_voice);
  CHECK(code_of([&] { tts.synthesize("", "f1"); }) == ErrorCode::invalid_input);
  CHECK(tts.voices() == std::vector<VoiceDescriptor>{kF1, kM1});
}

TEST_CASE("wallclock mocks really wait") {
  MockTextToSpeech tts({kF1}, LatencyModel::fixed(60), TimeMode::wallclock);
  auto t0 = std::chrono::steady_clock::now();
  tts.synthesize("hello", "f1");
  CHECK(std::chrono::steady_clock::now() - t0 >= 60ms);
}

TEST_CASE("synthesis concurrency limit") {
  MockTextToSpeech tts({kF1}, LatencyModel::fixed(50), TimeMode::wallclock, 1);
  auto t0 = std::chrono::steady_clock::now();
  std::thread a([&] { tts.synthesize("one", "f1"); });
  std::thread b([&] { tts.synthesize("two", "f1"); });
  a.join();
  b.join();
  CHECK(std::chrono::steady_clock::now() - t0 >= 100ms);
}

TEST_CASE("property: STT of TTS is the identity") {
  MockTextToSpeech tts = mock_tts();
  MockSpeechToText stt(default_stt_model(), TimeMode::simulated);
  std::mt19937 rng(1);
  const std::vector<std::string> vocab{"hello", "my", "chest", "hurts,", "a", "lot.", "\xc3\xa8", "7", "ok?"};
  for (int i = 0; i < 300; ++i) {
    std::string text;
    for (std::size_t k = 0, n = 1 + rng() % 20; k < n; ++k) text += (k ? " " : "") + vocab[rng() % vocab.size()];
    CHECK(stt.transcribe(tts.synthesize(text, rng() % 2 ? "f1" : "m1").env).text == text);
  }
}

TEST_CASE("builtin agents") {
  auto triage = BuiltinAgent::make("builtin:triage", default_agent_model(), TimeMode::simulated);
  AgentReply r = triage->respond("u1", "hello");
  CHECK(r.replies == std::vector<std::string>{"Welcome to triage. What symptom brings you in today?"});
  CHECK(r.processing_ms == 100);
  CHECK(triage->respond("u1", "").replies == std::vector<std::string>{std::string(agents::kRepromptReply)});
  // Senders keep separate dialogues.
  CHECK(triage->respond("u2", "hello").replies == r.replies);
  triage->forget("u1");
  CHECK(triage->respond("u1", "hi").replies == r.replies);

  auto echo = BuiltinAgent::make("echo", default_agent_model(), TimeMode::simulated);
  CHECK(echo->respond("u", "  say   this ").replies == std::vector<std::string>{"say this"});
  CHECK(echo->respond("u", "").replies == std::vector<std::string>{std::string(agents::kRepromptReply)});
  CHECK(code_of([] { BuiltinAgent::make("oracle", default_agent_model(), TimeMode::simulated); }) ==
        ErrorCode::config_error);

  AgentRouter router;
  router.add("triage", std::move(triage));
  CHECK(code_of([&] { router.respond("nope", "u", "hi"); }) == ErrorCode::unknown_agent);
}

TEST_CASE("catalog") {
  BackendSet set = make_backends(GatewayConfig::defaults());
  const Catalog& cat = set.list_catalog();
  REQUIRE(cat.agents.size() == 2);
  CHECK(cat.agents[0].agent_id == "anamnesis");
  CHECK(cat.agents[1].agent_id == "triage");
  REQUIRE(cat.voices.size() == 2);
  CHECK(cat.voices[0].voice_id == "f1");
  CHECK(cat.voices[1].voice_id == "m1");
  CHECK(make_backends(GatewayConfig::defaults()).list_catalog() == cat);

  Catalog empty = make_catalog({}, {});
  CHECK(empty.agents.empty());
  CHECK(empty.voices.empty());

  CHECK(code_of([] { make_catalog({}, {kF1, kF1}); }) == ErrorCode::config_error);
  CHECK(code_of([] {
          make_catalog({{"a", "A", "builtin:echo"}, {"a", "B", "builtin:echo"}}, {});
        }) == ErrorCode::config_error);
}

TEST_CASE("split_url") {
  CHECK(split_url("http://127.0.0.1:9090") == std::pair<std::string, std::string>{"http://127.0.0.1:9090", ""});
  CHECK(split_url("http://h:1/agents/x/v1/respond") ==
        std::pair<std::string, std::string>{"http://h:1", "/agents/x/v1/respond"});
}

TEST_CASE("HTTP backend protocol round trip") {
  auto stt = std::make_shared<MockSpeechToText>(default_stt_model(), TimeMode::simulated);
  auto tts = std::make_shared<MockTextToSpeech>(mock_tts());
  AgentRouter agents;
  agents.add("triage", BuiltinAgent::make("triage", default_agent_model(), TimeMode::simulated));
  agents.add("echo", BuiltinAgent::make("echo", default_agent_model(), TimeMode::simulated));
  BackendServer server(stt, tts, agents, "triage");
  int port = server.bind("127.0.0.1", 0);
  server.start();
  std::string base = "http://127.0.0.1:" + std::to_string(port);

  HttpSpeechToText remote_stt(base);
  HttpTextToSpeech remote_tts(base);

  Synthesis s = remote_tts.synthesize("How are you today?", "f1");
  CHECK(s.duration_ms == 1720);
  CHECK(s.processing_ms == 1462);
  CHECK(s.env == encode_sim_audio("How are you today?", kF1));
  Transcription t = remote_stt.transcribe(s.env);
  CHECK(t.text == "How are you today?");
  CHECK(t.processing_ms == 800);

  CHECK(remote_tts.voices() == std::vector<VoiceDescriptor>{kF1, kM1});
  CHECK(code_of([&] { remote_tts.synthesize("hi", "vx"); }) == ErrorCode::unknown_voice);
  CHECK(code_of([&] { remote_tts.synthesize("", "f1"); }) == ErrorCode::invalid_input);
  CHECK(code_of([&] { remote_stt.transcribe(AudioEnvelope{AudioFormat::opaque, {9}}); }) ==
        ErrorCode::transcription_failed);

  HttpAgent default_agent(base);
  CHECK(default_agent.respond("u1", "hello").replies ==
        std::vector<std::string>{"Welcome to triage. What symptom brings you in today?"});
  HttpAgent echo(base + "/agents/echo/v1/respond");
  CHECK(echo.respond("u1", "ping pong").replies == std::vector<std::string>{"ping pong"});
  HttpAgent missing(base + "/agents/nope/v1/respond");
  CHECK(code_of([&] { missing.respond("u1", "x"); }) == ErrorCode::unknown_agent);

  server.stop();
}

TEST_CASE("dead endpoints are unavailable") {
  // Grab a free port, then close it again.
  int port = 0;
  {
    BackendServer probe(nullptr, nullptr);
    port = probe.bind("127.0.0.1", 0);
  }
  std::string dead = "http://127.0.0.1:" + std::to_string(port);
  CHECK(code_of([&] { HttpSpeechToText(dead, 500ms).transcribe(encode_sim_audio("hi", kF1)); }) ==
        ErrorCode::backend_unavailable);
  CHECK(code_of([&] { HttpTextToSpeech(dead, 500ms).synthesize("hi", "f1"); }) ==
        ErrorCode::backend_unavailable);
  CHECK(code_of([&] { HttpAgent(dead, 500ms).respond("u", "hi"); }) == ErrorCode::backend_unavailable);
}
