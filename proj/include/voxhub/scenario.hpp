#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "voxhub/gateway.hpp"

namespace voxhub {

struct ScenarioExpectations {
  std::optional<std::string> final_colour;
  /// Per-turn masked flags; empty means unchecked.
  std::vector<bool> masked;
  /// Substrings the last turn's spoken reply must contain.
  std::vector<std::string> final_reply_contains;
};

/// A scripted conversation replayed against an in-process gateway.
struct ScenarioScript {
  std::string name;
  std::string agent_id;
  std::string voice_id;
  std::vector<std::string> utterances;
  /// Utterances are sent as SIMA1 audio (through STT) unless false.
  bool audio = true;
  ScenarioExpectations expectations;

  /// Throws invalid_input when there are no utterances.
  void validate() const;
  static ScenarioScript from_json(const nlohmann::json& j);
  static ScenarioScript from_file(const std::filesystem::path& path);
};

/// Everything the client observed for one turn.
struct TurnRecord {
  std::string nonce;
  std::string utterance;
  std::string transcript;
  std::vector<std::string> chunks;
  std::optional<TurnReport> report;
  bool failed = false;
  std::string error;
  /// Messages arrived as transcript, chunk_audio 1..n, turn_end.
  bool ordered = true;
  /// Messages carrying another session's id or another turn's nonce.
  std::size_t foreign_messages = 0;

  std::string reply_text() const;
};

/// In-process client: one session, serial turns.
class ScriptedClient {
 public:
  explicit ScriptedClient(Gateway& gateway);

  /// Sends hello; throws protocol_error if the gateway refuses.
  void open();
  void select_agent(const std::string& agent_id);
  void select_voice(const std::string& voice_id);
  TurnRecord say(const std::string& utterance, bool audio);
  void close();

  const std::string& session_id() const { return session_id_; }
  const std::string& voice_id() const { return voice_id_; }

 private:
  ServerMessage expect_ack(const ClientMessage& msg);

  Gateway& gateway_;
  std::string session_id_;
  std::string voice_id_;
  int turn_ = 0;
};

struct SimulationResult {
  std::string session_id;
  std::vector<TurnRecord> turns;
  std::vector<std::string> mismatches;

  bool passed() const { return mismatches.empty(); }
};

/// Colour word mentioned last in `text`, if any.
std::optional<std::string> find_colour(const std::string& text);

SimulationResult simulate(const ScenarioScript& script, Gateway& gateway);
/// Runs on a fresh gateway forced into simulated time.
SimulationResult simulate(const ScenarioScript& script, GatewayConfig cfg);

void print_simulation(std::ostream& out, const ScenarioScript& script, const SimulationResult& result);

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

struct LatencyStats {
  std::size_t count = 0;
  double mean_ms = 0.0;
  Millis p50_ms = 0;
  Millis p95_ms = 0;
  Millis max_ms = 0;

  static LatencyStats of(const std::vector<Millis>& values);
};

struct BenchOptions {
  std::size_t sessions = 1;
  std::size_t turns = 1;
};

struct BenchResult {
  LatencyStats first_audio;
  LatencyStats max_gap;
  /// Measured first audio minus the model-predicted one, per turn.
  LatencyStats overhead;
  std::size_t turns_completed = 0;
  std::size_t failed_turns = 0;
  std::size_t leaks = 0;
  std::size_t ordering_violations = 0;
};

/// Concurrent scripted sessions against the gateway's builtin backends.
/// Session k talks to triage (even k) or anamnesis (odd k) with utterances
/// tagged by k so cross-session leakage is detectable.
BenchResult bench(Gateway& gateway, const BenchOptions& opts);

std::vector<std::string> bench_utterances(std::size_t session, std::size_t turns, bool triage);

nlohmann::json to_json(const LatencyStats& s);
nlohmann::json to_json(const BenchResult& r);

}  // namespace voxhub
