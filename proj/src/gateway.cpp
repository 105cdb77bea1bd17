#include "voxhub/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "voxhub/error.hpp"
#include "voxhub/json_io.hpp"
#include "voxhub/tokens.hpp"

namespace voxhub {

using nlohmann::json;

namespace {

LatencyModel latency_from_json(const json& j, LatencyModel fallback) {
  LatencyModel m;
  m.kind = latency_kind_from_string(j.value("kind", std::string(to_string(fallback.kind))));
  m.base_ms = j.value("base_ms", Millis{0});
  m.ms_per_token = j.value("ms_per_token", Millis{0});
  m.rtf = j.value("rtf", 0.0);
  m.jitter_ms = j.value("jitter_ms", Millis{0});
  m.seed = j.value("seed", std::uint64_t{0});
  return m;
}

bool is_builtin(const std::string& endpoint) { return endpoint.starts_with("builtin:"); }

/// Turn-relative clock: virtual in simulated mode, steady_clock otherwise.
class TurnClock {
 public:
  explicit TurnClock(TimeMode mode) : mode_(mode), origin_(std::chrono::steady_clock::now()) {}

  Millis now() const {
    if (mode_ == TimeMode::simulated) return virtual_ms_;
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                 origin_)
        .count();
  }

  /// A backend reported `ms` of processing; wall-clock mode already waited.
  void advance(Millis ms) {
    if (mode_ == TimeMode::simulated) virtual_ms_ += ms;
  }

 private:
  TimeMode mode_;
  std::chrono::steady_clock::time_point origin_;
  Millis virtual_ms_ = 0;
};

ServerMessage error_message(ErrorCode code, const std::string& detail, const std::string& session = {}) {
  return ServerMessage::make_error(to_string(code), detail, session);
}

/// Error codes that mean the client's audio could not be understood.
bool is_audio_error(ErrorCode code) {
  return code == ErrorCode::transcription_failed || code == ErrorCode::unsupported_format ||
         code == ErrorCode::malformed_payload || code == ErrorCode::bad_audio;
}

}  // namespace

// --- config -----------------------------------------------------------------

GatewayConfig GatewayConfig::defaults() {
  GatewayConfig cfg;
  cfg.agents = {{"triage", "Triage room", "builtin:triage"},
                {"anamnesis", "Anamnesis room", "builtin:anamnesis"}};
  cfg.voices = {{"f1", "Female voice 1", 400, 120}, {"m1", "Male voice 1", 400, 120}};
  return cfg;
}

GatewayConfig GatewayConfig::from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::config_error, "config must be a JSON object");
  GatewayConfig cfg = defaults();
  try {
    cfg.listen = j.value("listen", cfg.listen);
    if (j.contains("time_mode")) cfg.time_mode = time_mode_from_string(j.at("time_mode").get<std::string>());
    cfg.max_sessions = j.value("max_sessions", cfg.max_sessions);
    cfg.max_frame_bytes = j.value("max_frame_bytes", cfg.max_frame_bytes);
    cfg.threshold_ms = j.value("threshold_ms", cfg.threshold_ms);
    cfg.transport_ms = j.value("transport_ms", cfg.transport_ms);
    cfg.backend_timeout = std::chrono::milliseconds(
        j.value("backend_timeout_ms", static_cast<Millis>(cfg.backend_timeout.count())));
    if (j.contains("chunking")) {
      const json& c = j.at("chunking");
      cfg.chunking.terminators = c.value("terminators", cfg.chunking.terminators);
      cfg.chunking.soft_breaks = c.value("soft_breaks", cfg.chunking.soft_breaks);
      cfg.chunking.max_tokens = c.value("max_tokens", cfg.chunking.max_tokens);
      cfg.chunking.min_tokens = c.value("min_tokens", cfg.chunking.min_tokens);
      std::string mark = c.value("insert_mark", std::string(1, cfg.chunking.insert_mark));
      if (mark.size() != 1) throw Error(ErrorCode::config_error, "insert_mark must be one character");
      cfg.chunking.insert_mark = mark[0];
      cfg.chunking.merge_short = c.value("merge_short", cfg.chunking.merge_short);
    }
    if (j.contains("stt")) {
      const json& s = j.at("stt");
      cfg.stt_url = s.value("url", cfg.stt_url);
      if (s.contains("latency")) cfg.stt_model = latency_from_json(s.at("latency"), cfg.stt_model);
    }
    if (j.contains("tts")) {
      const json& t = j.at("tts");
      cfg.tts_url = t.value("url", cfg.tts_url);
      if (t.contains("latency")) cfg.tts_model = latency_from_json(t.at("latency"), cfg.tts_model);
      cfg.tts_max_concurrent = t.value("max_concurrent", cfg.tts_max_concurrent);
    }
    if (j.contains("agent") && j.at("agent").contains("latency"))
      cfg.agent_model = latency_from_json(j.at("agent").at("latency"), cfg.agent_model);
    if (j.contains("agents")) cfg.agents = j.at("agents").get<std::vector<AgentDescriptor>>();
    if (j.contains("voices")) cfg.voices = j.at("voices").get<std::vector<VoiceDescriptor>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config_error, e.what());
  }
  cfg.validate();
  return cfg;
}

GatewayConfig GatewayConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::config_error, "cannot open config '" + path.string() + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::config_error, "config '" + path.string() + "' is not valid JSON");
  return from_json(j);
}

void GatewayConfig::apply_environment() {
  if (const char* v = std::getenv("VOXHUB_STT_URL"); v && *v) stt_url = v;
  if (const char* v = std::getenv("VOXHUB_TTS_URL"); v && *v) tts_url = v;
}

void GatewayConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::config_error, what); };
  if (max_sessions == 0) fail("max_sessions must be positive");
  if (max_frame_bytes < 64) fail("max_frame_bytes is too small");
  if (threshold_ms < 0 || transport_ms < 0) fail("threshold_ms and transport_ms must be non-negative");
  try {
    chunking.validate();
  } catch (const Error& e) {
    fail(std::string("chunking: ") + e.what());
  }
  stt_model.validate();
  tts_model.validate();
  agent_model.validate();
  make_catalog(agents, voices);
  bool remote = !stt_url.empty() || !tts_url.empty();
  for (const auto& a : agents) {
    if (is_builtin(a.endpoint)) {
      BuiltinAgent::make(a.endpoint, agent_model, time_mode);
    } else if (a.endpoint.starts_with("http://") || a.endpoint.starts_with("https://")) {
      remote = true;
    } else {
      fail("agent '" + a.agent_id + "' has unsupported endpoint '" + a.endpoint + "'");
    }
  }
  if (remote && time_mode == TimeMode::simulated)
    fail("simulated time mode requires builtin backends");
}

BackendSet make_backends(const GatewayConfig& cfg) {
  cfg.validate();
  BackendSet set;
  set.catalog = make_catalog(cfg.agents, cfg.voices);
  if (cfg.stt_url.empty()) {
    set.stt = std::make_shared<MockSpeechToText>(cfg.stt_model, cfg.time_mode);
  } else {
    set.stt = std::make_shared<HttpSpeechToText>(cfg.stt_url, cfg.backend_timeout);
  }
  if (cfg.tts_url.empty()) {
    set.tts = std::make_shared<MockTextToSpeech>(cfg.voices, cfg.tts_model, cfg.time_mode,
                                                 cfg.tts_max_concurrent);
  } else {
    set.tts = std::make_shared<HttpTextToSpeech>(cfg.tts_url, cfg.backend_timeout);
  }
  for (const auto& a : set.catalog.agents) {
    if (is_builtin(a.endpoint)) {
      set.agents.add(a.agent_id, BuiltinAgent::make(a.endpoint, cfg.agent_model, cfg.time_mode));
    } else {
      set.agents.add(a.agent_id, std::make_shared<HttpAgent>(a.endpoint, cfg.backend_timeout));
    }
  }
  return set;
}

// --- metrics ----------------------------------------------------------------

Millis percentile(std::vector<Millis> values, double pct) {
  if (values.empty()) return 0;
  std::ranges::sort(values);
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

void MetricsAggregator::record(const std::string& session_id, const TurnReport& report) {
  std::lock_guard lock(mu_);
  for (Series* s : {&global_, &sessions_[session_id]}) {
    s->first_audio.push_back(report.first_audio_ms);
    s->masked += report.masked ? 1 : 0;
    s->exceeded += report.threshold_exceeded ? 1 : 0;
  }
}

void MetricsAggregator::record_failure() {
  std::lock_guard lock(mu_);
  ++failed_;
}

LatencySummary MetricsAggregator::summarize(const Series& s) {
  LatencySummary out;
  out.turns = s.first_audio.size();
  if (out.turns == 0) return out;
  double n = static_cast<double>(out.turns);
  double sum = 0;
  for (Millis v : s.first_audio) sum += static_cast<double>(v);
  out.mean_first_audio_ms = sum / n;
  out.p95_first_audio_ms = percentile(s.first_audio, 95.0);
  out.fraction_masked = static_cast<double>(s.masked) / n;
  out.threshold_exceeded_rate = static_cast<double>(s.exceeded) / n;
  return out;
}

MetricsSnapshot MetricsAggregator::snapshot() const {
  std::lock_guard lock(mu_);
  MetricsSnapshot out;
  out.global = summarize(global_);
  for (const auto& [id, series] : sessions_) out.sessions[id] = summarize(series);
  out.failed_turns = failed_;
  return out;
}

json to_json(const MetricsSnapshot& m) {
  auto summary = [](const LatencySummary& s) {
    return json{{"turns", s.turns},
                {"mean_first_audio_ms", s.mean_first_audio_ms},
                {"p95_first_audio_ms", s.p95_first_audio_ms},
                {"fraction_masked", s.fraction_masked},
                {"threshold_exceeded_rate", s.threshold_exceeded_rate}};
  };
  json sessions = json::object();
  for (const auto& [id, s] : m.sessions) sessions[id] = summary(s);
  return json{{"global", summary(m.global)},
              {"sessions", sessions},
              {"failed_turns", m.failed_turns},
              {"active_sessions", m.active_sessions}};
}

// --- gateway ----------------------------------------------------------------

Gateway::Gateway(GatewayConfig cfg) : Gateway(cfg, make_backends(cfg)) {}

Gateway::Gateway(GatewayConfig cfg, BackendSet backends)
    : cfg_(std::move(cfg)), backends_(std::move(backends)) {
  cfg_.chunking.validate();
}

std::shared_ptr<Gateway::Session> Gateway::find(const std::string& id) const {
  std::lock_guard lock(sessions_mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::vector<ServerMessage> Gateway::open_session(const ClientMessage& hello) {
  if (hello.kind != ClientKind::hello || hello.protocol_version != kProtocolVersion)
    return {ServerMessage::make_error("protocol", "unsupported hello (protocol version " +
                                                      std::to_string(hello.protocol_version) + ")")};
  const Catalog& cat = backends_.catalog;
  if (cat.agents.empty() || cat.voices.empty())
    return {ServerMessage::make_error("config", "gateway has no agents or no voices configured")};

  auto session = std::make_shared<Session>();
  {
    std::lock_guard lock(sessions_mu_);
    if (sessions_.size() >= cfg_.max_sessions)
      return {error_message(ErrorCode::busy, "session limit of " + std::to_string(cfg_.max_sessions) + " reached")};
    char id[32];
    std::snprintf(id, sizeof id, "s%06llu", static_cast<unsigned long long>(next_session_++));
    session->state = SessionState{id, cat.agents.front().agent_id, cat.voices.front().voice_id, 0,
                                  SessionStatus::idle};
    sessions_[id] = session;
  }

  ServerMessage ack;
  ack.kind = ServerKind::session_ack;
  ack.session_id = session->state.session_id;
  ack.agent_id = session->state.agent_id;
  ack.voice_id = session->state.voice_id;
  ServerMessage catalog;
  catalog.kind = ServerKind::catalog;
  catalog.session_id = ack.session_id;
  catalog.catalog = cat;
  return {ack, catalog};
}

void Gateway::close_session(const std::string& session_id) {
  std::shared_ptr<Session> session;
  {
    std::lock_guard lock(sessions_mu_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) return;
    session = it->second;
    sessions_.erase(it);
  }
  std::lock_guard lock(session->mu);
  session->state.status = SessionStatus::closed;
}

std::optional<SessionState> Gateway::session_state(const std::string& session_id) const {
  auto session = find(session_id);
  if (!session) return std::nullopt;
  std::lock_guard lock(session->mu);
  return session->state;
}

std::optional<TurnContext> Gateway::last_turn(const std::string& session_id) const {
  auto session = find(session_id);
  if (!session) return std::nullopt;
  std::lock_guard lock(session->mu);
  return session->last_turn;
}

MetricsSnapshot Gateway::metrics_snapshot() const {
  MetricsSnapshot snap = metrics_.snapshot();
  std::lock_guard lock(sessions_mu_);
  snap.active_sessions = sessions_.size();
  return snap;
}

void Gateway::handle_frame(std::span<const std::uint8_t> frame, const MessageSink& sink) {
  ClientMessage msg;
  try {
    msg = unframe_client(frame, cfg_.max_frame_bytes);
  } catch (const Error& e) {
    sink(error_message(e.code(), e.what()));
    return;
  }
  handle(msg, sink);
}

void Gateway::handle(const ClientMessage& msg, const MessageSink& sink) {
  handle(msg, sink, [](std::function<void()> turn) { turn(); });
}

void Gateway::handle(const ClientMessage& msg, const MessageSink& sink, const TurnLauncher& launch) {
  try {
    validate(msg);
  } catch (const Error& e) {
    sink(error_message(e.code(), e.what(), msg.session_id));
    return;
  }
  if (msg.kind == ClientKind::hello) {
    for (const auto& m : open_session(msg)) sink(m);
    return;
  }
  auto session = find(msg.session_id);
  if (!session) {
    sink(error_message(ErrorCode::unknown_session, "no session '" + msg.session_id + "'", msg.session_id));
    return;
  }
  switch (msg.kind) {
    case ClientKind::select_agent:
    case ClientKind::select_voice: handle_control(*session, msg, sink); break;
    case ClientKind::utterance_audio:
    case ClientKind::utterance_text: handle_utterance(session, msg, sink, launch); break;
    case ClientKind::bye: close_session(msg.session_id); break;
    case ClientKind::hello: break;
  }
}

void Gateway::handle_control(Session& session, const ClientMessage& msg, const MessageSink& sink) {
  ServerMessage reply;
  {
    std::lock_guard lock(session.mu);
    SessionState& st = session.state;
    if (st.status == SessionStatus::in_turn) {
      reply = error_message(ErrorCode::turn_in_progress, "a turn is in progress", st.session_id);
    } else if (msg.kind == ClientKind::select_agent && !catalog().find_agent(msg.agent_id)) {
      reply = error_message(ErrorCode::unknown_agent, "unknown agent '" + msg.agent_id + "'", st.session_id);
    } else if (msg.kind == ClientKind::select_voice && !catalog().find_voice(msg.voice_id)) {
      reply = error_message(ErrorCode::unknown_voice, "unknown voice '" + msg.voice_id + "'", st.session_id);
    } else {
      if (msg.kind == ClientKind::select_agent) st.agent_id = msg.agent_id;
      if (msg.kind == ClientKind::select_voice) st.voice_id = msg.voice_id;
      reply.kind = ServerKind::session_ack;
      reply.session_id = st.session_id;
      reply.agent_id = st.agent_id;
      reply.voice_id = st.voice_id;
    }
  }
  sink(reply);
}

void Gateway::handle_utterance(const std::shared_ptr<Session>& session, const ClientMessage& msg,
                               const MessageSink& sink, const TurnLauncher& launch) {
  SessionState snapshot;
  {
    std::lock_guard lock(session->mu);
    if (session->state.status != SessionStatus::idle) {
      ErrorCode code = session->state.status == SessionStatus::in_turn ? ErrorCode::turn_in_progress
                                                                       : ErrorCode::unknown_session;
      sink(error_message(code, "session is not idle", session->state.session_id));
      return;
    }
    session->state.status = SessionStatus::in_turn;
    snapshot = session->state;
  }

  launch([this, session, msg, sink, snapshot] {
    TurnContext ctx;
    ctx.nonce = msg.nonce;
    bool started = true;
    // Back to idle however the turn ends, including a sink that throws.
    struct Release {
      Session& session;
      TurnContext& ctx;
      bool& started;
      ~Release() {
        std::lock_guard lock(session.mu);
        if (session.state.status == SessionStatus::in_turn) session.state.status = SessionStatus::idle;
        if (started) {
          ++session.state.turn_index;
          session.last_turn = std::move(ctx);
        }
      }
    } release{*session, ctx, started};

    try {
      run_turn(snapshot, msg, sink, ctx);
    } catch (const Error& e) {
      // Only audio rejected before the turn began lands here.
      started = false;
      sink(error_message(e.code(), e.what(), snapshot.session_id));
    }
  });
}

void Gateway::run_turn(const SessionState& st, const ClientMessage& msg, const MessageSink& sink,
                       TurnContext& ctx) {
  TurnClock clock(cfg_.time_mode);
  const std::string& sid = st.session_id;

  auto fail_turn = [&](ErrorCode code, const std::string& detail) {
    ServerMessage end;
    end.kind = ServerKind::turn_end;
    end.session_id = sid;
    end.nonce = msg.nonce;
    end.failed = true;
    end.code = std::string(to_string(code));
    end.detail = detail;
    metrics_.record_failure();
    sink(end);
  };

  // Speech to text. Audio that cannot be decoded is refused before the turn starts.
  std::string transcript;
  Millis stt_ms = 0;
  if (msg.kind == ClientKind::utterance_audio) {
    if (msg.audio->format == AudioFormat::sima1) {
      try {
        decode_sim_audio(*msg.audio);
      } catch (const Error& e) {
        throw Error(ErrorCode::bad_audio, e.what());
      }
    }
    try {
      Transcription t = backends_.stt->transcribe(*msg.audio);
      clock.advance(t.processing_ms);
      transcript = t.text;
    } catch (const Error& e) {
      if (is_audio_error(e.code())) throw Error(ErrorCode::bad_audio, e.what());
      return fail_turn(e.code(), e.what());
    }
    stt_ms = clock.now();
  } else {
    transcript = msg.text;
  }
  ctx.transcript_ready = clock.now();
  {
    ServerMessage tr;
    tr.kind = ServerKind::transcript;
    tr.session_id = sid;
    tr.nonce = msg.nonce;
    tr.text = transcript;
    tr.stt_ms = stt_ms;
    sink(tr);
  }

  try {
    std::string message = token_count(transcript) == 0 ? std::string(agents::kRepromptTrigger) : transcript;
    Millis before_agent = clock.now();
    AgentReply reply = backends_.agents.respond(st.agent_id, sid, message);
    clock.advance(reply.processing_ms);
    ctx.reply_ready = clock.now();
    Millis agent_ms = ctx.reply_ready - before_agent;

    std::vector<Chunk> chunks = chunk_response(join_tokens(reply.replies), cfg_.chunking);
    std::vector<Millis> tts_ms, durations, ready;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      ctx.synth_start.push_back(clock.now());
      Synthesis s = backends_.tts->synthesize(chunks[i].text, st.voice_id);
      clock.advance(s.processing_ms);
      ctx.synth_end.push_back(clock.now());
      tts_ms.push_back(ctx.synth_end.back() - ctx.synth_start.back());
      durations.push_back(s.duration_ms);

      Millis arrival = clock.now() + (cfg_.time_mode == TimeMode::simulated ? cfg_.transport_ms : 0);
      ctx.sent.push_back(arrival);
      ready.push_back(arrival);
      ServerMessage chunk;
      chunk.kind = ServerKind::chunk_audio;
      chunk.session_id = sid;
      chunk.nonce = msg.nonce;
      chunk.seq = static_cast<int>(i + 1);
      chunk.text = chunks[i].text;
      chunk.duration_ms = s.duration_ms;
      chunk.audio = std::move(s.env);
      sink(chunk);
    }

    TurnReport report;
    if (chunks.empty()) {
      report.stt_ms = stt_ms;
      report.agent_ms = agent_ms;
      report.first_audio_ms = clock.now();
      report.threshold_ms = cfg_.threshold_ms;
      report.threshold_exceeded = report.first_audio_ms > cfg_.threshold_ms;
    } else {
      Timeline tl = timeline_from_ready(ready, durations);
      report = make_turn_report(stt_ms, agent_ms, std::move(tts_ms), std::move(durations), tl,
                                cfg_.threshold_ms);
    }
    metrics_.record(sid, report);
    ServerMessage end;
    end.kind = ServerKind::turn_end;
    end.session_id = sid;
    end.nonce = msg.nonce;
    end.report = std::move(report);
    sink(end);
  } catch (const Error& e) {
    fail_turn(e.code(), e.what());
  } catch (const std::exception& e) {
    fail_turn(ErrorCode::backend_unavailable, e.what());
  }
}

TurnSpec Gateway::predicted_spec(const TurnPlanInput& in) const {
  const VoiceDescriptor* voice = catalog().find_voice(in.voice_id);
  if (!voice) throw Error(ErrorCode::unknown_voice, "unknown voice '" + in.voice_id + "'");
  TurnSpec spec;
  spec.stt_ms = in.audio ? cfg_.stt_model.evaluate(token_count(in.utterance), in.utterance_audio_ms) : 0;
  spec.agent_ms = cfg_.agent_model.evaluate(token_count(in.agent_message), 0);
  for (const auto& text : in.chunk_texts) {
    spec.durations.push_back(compute_duration(text, *voice));
    spec.tokens.push_back(token_count(text));
  }
  spec.tts_model = cfg_.tts_model;
  spec.transport_ms = cfg_.transport_ms;
  return spec;
}

}  // namespace voxhub
