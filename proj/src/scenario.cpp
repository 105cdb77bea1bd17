#include "voxhub/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include "voxhub/agents.hpp"
#include "voxhub/error.hpp"
#include "voxhub/json_io.hpp"
#include "voxhub/tokens.hpp"

namespace voxhub {

using nlohmann::json;

namespace {

constexpr Millis kSilenceMs = 500;

std::string join_list(const std::vector<Millis>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(values[i]);
  }
  return out + "]";
}

}  // namespace

// --- script -----------------------------------------------------------------

void ScenarioScript::validate() const {
  if (utterances.empty())
    throw Error(ErrorCode::invalid_input, "scenario '" + name + "' has no utterances");
}

ScenarioScript ScenarioScript::from_json(const json& j) {
  ScenarioScript s;
  try {
    s.name = j.value("name", "");
    s.agent_id = j.value("agent_id", "");
    s.voice_id = j.value("voice_id", "");
    s.audio = j.value("mode", std::string("audio")) != "text";
    s.utterances = j.value("utterances", std::vector<std::string>{});
    if (j.contains("expectations")) {
      const json& e = j.at("expectations");
      if (e.contains("final_colour")) s.expectations.final_colour = e.at("final_colour").get<std::string>();
      s.expectations.masked = e.value("masked", std::vector<bool>{});
      s.expectations.final_reply_contains = e.value("final_reply_contains", std::vector<std::string>{});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_input, e.what());
  }
  s.validate();
  return s;
}

ScenarioScript ScenarioScript::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::invalid_input, "cannot open script '" + path.string() + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::invalid_input, "script '" + path.string() + "' is not valid JSON");
  ScenarioScript s = from_json(j);
  if (s.name.empty()) s.name = path.stem().string();
  return s;
}

std::string TurnRecord::reply_text() const { return join_tokens(chunks); }

// --- client -----------------------------------------------------------------

ScriptedClient::ScriptedClient(Gateway& gateway) : gateway_(gateway) {}

void ScriptedClient::open() {
  std::vector<ServerMessage> got = gateway_.open_session(ClientMessage::hello());
  if (got.empty() || got.front().kind != ServerKind::session_ack)
    throw Error(ErrorCode::protocol_error,
                "hello refused: " + (got.empty() ? std::string("no reply") : got.front().code));
  session_id_ = got.front().session_id;
  voice_id_ = got.front().voice_id;
}

ServerMessage ScriptedClient::expect_ack(const ClientMessage& msg) {
  std::vector<ServerMessage> got;
  gateway_.handle(msg, [&](const ServerMessage& m) { got.push_back(m); });
  if (got.size() != 1 || got.front().kind != ServerKind::session_ack)
    throw Error(ErrorCode::protocol_error,
                "control message refused: " + (got.empty() ? std::string("no reply") : got.front().code));
  return got.front();
}

void ScriptedClient::select_agent(const std::string& agent_id) {
  expect_ack(ClientMessage::select_agent(session_id_, agent_id));
}

void ScriptedClient::select_voice(const std::string& voice_id) {
  voice_id_ = expect_ack(ClientMessage::select_voice(session_id_, voice_id)).voice_id;
}

TurnRecord ScriptedClient::say(const std::string& utterance, bool audio) {
  TurnRecord rec;
  rec.nonce = "t" + std::to_string(++turn_);
  rec.utterance = utterance;

  ClientMessage msg;
  if (audio) {
    const VoiceDescriptor* voice = gateway_.catalog().find_voice(voice_id_);
    if (!voice) throw Error(ErrorCode::unknown_voice, "unknown voice '" + voice_id_ + "'");
    AudioEnvelope env = token_count(utterance) == 0 ? encode_silence(*voice, kSilenceMs)
                                                    : encode_sim_audio(utterance, *voice);
    msg = ClientMessage::utterance_audio(session_id_, rec.nonce, std::move(env));
  } else {
    msg = ClientMessage::utterance_text(session_id_, rec.nonce, utterance);
  }

  enum class Stage { start, streaming, ended } stage = Stage::start;
  gateway_.handle(msg, [&](const ServerMessage& m) {
    if (m.session_id != session_id_ || (m.kind != ServerKind::error && m.nonce != rec.nonce)) {
      ++rec.foreign_messages;
      return;
    }
    switch (m.kind) {
      case ServerKind::transcript:
        if (stage != Stage::start) rec.ordered = false;
        stage = Stage::streaming;
        rec.transcript = m.text;
        break;
      case ServerKind::chunk_audio:
        if (stage != Stage::streaming || m.seq != static_cast<int>(rec.chunks.size()) + 1)
          rec.ordered = false;
        rec.chunks.push_back(m.text);
        break;
      case ServerKind::turn_end:
        if (stage == Stage::ended || (stage == Stage::start && !m.failed)) rec.ordered = false;
        stage = Stage::ended;
        rec.report = m.report;
        rec.failed = m.failed;
        if (m.failed) rec.error = m.code;
        break;
      case ServerKind::error:
        rec.failed = true;
        rec.error = m.code;
        stage = Stage::ended;
        break;
      default: rec.ordered = false; break;
    }
  });
  if (stage != Stage::ended) rec.ordered = false;
  return rec;
}

void ScriptedClient::close() {
  if (session_id_.empty()) return;
  gateway_.handle(ClientMessage::bye(session_id_), [](const ServerMessage&) {});
  session_id_.clear();
}

// --- simulate ---------------------------------------------------------------

std::optional<std::string> find_colour(const std::string& text) {
  std::optional<std::string> found;
  for (std::string word : split_tokens(text)) {
    std::string clean;
    for (char c : word)
      if (std::isalpha(static_cast<unsigned char>(c)))
        clean.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (agents::colour_from_string(clean)) found = clean;
  }
  return found;
}

SimulationResult simulate(const ScenarioScript& script, Gateway& gateway) {
  script.validate();
  SimulationResult result;
  ScriptedClient client(gateway);
  try {
    client.open();
    if (!script.agent_id.empty()) client.select_agent(script.agent_id);
    if (!script.voice_id.empty()) client.select_voice(script.voice_id);
  } catch (const Error& e) {
    result.mismatches.push_back(std::string("session setup failed: ") + e.what());
    return result;
  }
  result.session_id = client.session_id();
  for (const auto& utterance : script.utterances) {
    TurnRecord rec = client.say(utterance, script.audio);
    std::string where = "turn " + std::to_string(result.turns.size() + 1) + ": ";
    if (rec.failed) result.mismatches.push_back(where + "failed with " + rec.error);
    if (!rec.ordered) result.mismatches.push_back(where + "messages out of order");
    if (rec.foreign_messages > 0) result.mismatches.push_back(where + "received another session's messages");
    result.turns.push_back(std::move(rec));
  }
  client.close();

  const ScenarioExpectations& want = script.expectations;
  const TurnRecord& last = result.turns.back();
  if (want.final_colour) {
    auto got = find_colour(last.reply_text());
    if (got != want.final_colour)
      result.mismatches.push_back("final colour: expected " + *want.final_colour + ", got " +
                                  got.value_or("none"));
  }
  for (std::size_t i = 0; i < want.masked.size(); ++i) {
    if (i >= result.turns.size() || !result.turns[i].report) {
      result.mismatches.push_back("masked flag for turn " + std::to_string(i + 1) + ": no report");
    } else if (result.turns[i].report->masked != want.masked[i]) {
      result.mismatches.push_back("masked flag for turn " + std::to_string(i + 1) + ": expected " +
                                  (want.masked[i] ? "true" : "false") + ", got " +
                                  (result.turns[i].report->masked ? "true" : "false"));
    }
  }
  for (const auto& needle : want.final_reply_contains)
    if (last.reply_text().find(needle) == std::string::npos)
      result.mismatches.push_back("final reply does not mention '" + needle + "'");
  return result;
}

SimulationResult simulate(const ScenarioScript& script, GatewayConfig cfg) {
  cfg.time_mode = TimeMode::simulated;
  Gateway gateway(std::move(cfg));
  return simulate(script, gateway);
}

void print_simulation(std::ostream& out, const ScenarioScript& script, const SimulationResult& result) {
  out << "scenario " << script.name << " (agent " << script.agent_id << ", voice " << script.voice_id
      << ", session " << result.session_id << ")\n";
  for (std::size_t i = 0; i < result.turns.size(); ++i) {
    const TurnRecord& t = result.turns[i];
    out << "turn " << i + 1 << " > " << t.utterance << "\n";
    out << "  transcript: " << t.transcript;
    if (t.report) out << " (stt " << t.report->stt_ms << " ms, agent " << t.report->agent_ms << " ms)";
    out << "\n";
    for (std::size_t c = 0; c < t.chunks.size(); ++c) {
      out << "  chunk " << c + 1 << ": " << t.chunks[c];
      if (t.report && c < t.report->chunk_durations_ms.size())
        out << " [" << t.report->chunk_durations_ms[c] << " ms audio, " << t.report->tts_ms_per_chunk[c]
            << " ms synth]";
      out << "\n";
    }
    if (t.report) {
      out << "  report: first_audio_ms=" << t.report->first_audio_ms
          << " gaps_ms=" << join_list(t.report->gaps_ms) << " masked=" << (t.report->masked ? "true" : "false")
          << " threshold_exceeded=" << (t.report->threshold_exceeded ? "true" : "false") << "\n";
    } else if (t.failed) {
      out << "  failed: " << t.error << "\n";
    }
  }
  out << "result: " << (result.passed() ? "PASS" : "FAIL") << "\n";
  for (const auto& m : result.mismatches) out << "  - " << m << "\n";
}

// --- bench ------------------------------------------------------------------

LatencyStats LatencyStats::of(const std::vector<Millis>& values) {
  LatencyStats s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0;
  for (Millis v : values) sum += static_cast<double>(v);
  s.mean_ms = sum / static_cast<double>(values.size());
  s.p50_ms = percentile(values, 50.0);
  s.p95_ms = percentile(values, 95.0);
  s.max_ms = *std::ranges::max_element(values);
  return s;
}

std::vector<std::string> bench_utterances(std::size_t session, std::size_t turns, bool triage) {
  std::string tag = " patient p" + std::to_string(session);
  std::vector<std::string> script =
      triage ? std::vector<std::string>{"hello from" + tag, "pain in the knee of" + tag, "seven for" + tag,
                                        "two hours for" + tag, "no says" + tag}
             : std::vector<std::string>{"hello from" + tag, "yes says" + tag, "allergy code of" + tag,
                                        "medication code of" + tag, "condition code of" + tag};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < turns; ++i)
    out.push_back(i < script.size() ? script[i] : "thank you from" + tag);
  return out;
}

BenchResult bench(Gateway& gateway, const BenchOptions& opts) {
  const GatewayConfig& cfg = gateway.config();
  bool predictable = cfg.stt_url.empty() && cfg.tts_url.empty();
  std::mutex mu;
  std::vector<Millis> first_audio, max_gap, overhead;
  BenchResult result;

  auto run_session = [&](std::size_t k) {
    std::vector<Millis> my_first, my_gap, my_overhead;
    std::size_t completed = 0, failed = 0, leaks = 0, unordered = 0;
    ScriptedClient client(gateway);
    try {
      client.open();
      bool triage = k % 2 == 0;
      if (gateway.catalog().find_agent(triage ? "triage" : "anamnesis"))
        client.select_agent(triage ? "triage" : "anamnesis");
      for (const auto& utterance : bench_utterances(k, opts.turns, triage)) {
        TurnRecord rec = client.say(utterance, true);
        if (rec.foreign_messages > 0 || rec.transcript != utterance) ++leaks;
        if (!rec.ordered) ++unordered;
        if (rec.failed || !rec.report) {
          ++failed;
          continue;
        }
        ++completed;
        my_first.push_back(rec.report->first_audio_ms);
        my_gap.push_back(rec.report->gaps_ms.empty() ? 0 : std::ranges::max(rec.report->gaps_ms));
        if (predictable && !rec.chunks.empty()) {
          const VoiceDescriptor* voice = gateway.catalog().find_voice(client.voice_id());
          TurnPlanInput plan{true, utterance, compute_duration(utterance, *voice),
                             token_count(rec.transcript) == 0 ? std::string(agents::kRepromptTrigger)
                                                              : rec.transcript,
                             rec.chunks, client.voice_id()};
          my_overhead.push_back(rec.report->first_audio_ms - schedule(gateway.predicted_spec(plan)).first_audio_ms);
        }
      }
      client.close();
    } catch (const Error&) {
      ++failed;
    }
    std::lock_guard lock(mu);
    first_audio.insert(first_audio.end(), my_first.begin(), my_first.end());
    max_gap.insert(max_gap.end(), my_gap.begin(), my_gap.end());
    overhead.insert(overhead.end(), my_overhead.begin(), my_overhead.end());
    result.turns_completed += completed;
    result.failed_turns += failed;
    result.leaks += leaks;
    result.ordering_violations += unordered;
  };

  std::vector<std::thread> threads;
  threads.reserve(opts.sessions);
  for (std::size_t k = 0; k < opts.sessions; ++k) threads.emplace_back(run_session, k);
  for (auto& t : threads) t.join();

  result.first_audio = LatencyStats::of(first_audio);
  result.max_gap = LatencyStats::of(max_gap);
  result.overhead = LatencyStats::of(overhead);
  return result;
}

json to_json(const LatencyStats& s) {
  return json{{"count", s.count}, {"mean_ms", s.mean_ms}, {"p50_ms", s.p50_ms},
              {"p95_ms", s.p95_ms}, {"max_ms", s.max_ms}};
}

json to_json(const BenchResult& r) {
  return json{{"first_audio", to_json(r.first_audio)},
              {"max_gap", to_json(r.max_gap)},
              {"gateway_overhead", to_json(r.overhead)},
              {"turns_completed", r.turns_completed},
              {"failed_turns", r.failed_turns},
              {"leaks", r.leaks},
              {"ordering_violations", r.ordering_violations}};
}

}  // namespace voxhub
