#include "voxhub/backends.hpp"

#include <algorithm>
#include <thread>

#include "voxhub/error.hpp"
#include "voxhub/tokens.hpp"

namespace voxhub {

std::string_view to_string(TimeMode mode) {
  return mode == TimeMode::wallclock ? "wallclock" : "simulated";
}

TimeMode time_mode_from_string(std::string_view name) {
  if (name == "wallclock") return TimeMode::wallclock;
  if (name == "simulated") return TimeMode::simulated;
  throw Error(ErrorCode::config_error, "unknown time mode '" + std::string(name) + "'");
}

bool Transcription::empty_transcript() const noexcept { return token_count(text) == 0; }

void sleep_for_processing(Millis ms) {
  if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

MockSpeechToText::MockSpeechToText(LatencyModel model, TimeMode mode) : model_(model), mode_(mode) {
  model_.validate();
}

Transcription MockSpeechToText::transcribe(const AudioEnvelope& env) {
  SimAudio audio;
  try {
    audio = decode_sim_audio(env);
  } catch (const Error& e) {
    throw Error(ErrorCode::transcription_failed, e.what());
  }
  Transcription out{audio.text, model_.evaluate(token_count(audio.text), audio.duration_ms)};
  if (mode_ == TimeMode::wallclock) sleep_for_processing(out.processing_ms);
  return out;
}

MockTextToSpeech::MockTextToSpeech(std::vector<VoiceDescriptor> voices, LatencyModel model,
                                   TimeMode mode, std::size_t max_concurrent)
    : voices_(make_catalog({}, std::move(voices)).voices), model_(model), mode_(mode) {
  model_.validate();
  if (max_concurrent > 0)
    slots_ = std::make_unique<std::counting_semaphore<>>(static_cast<std::ptrdiff_t>(max_concurrent));
}

Synthesis MockTextToSpeech::synthesize(std::string_view text, const std::string& voice_id) {
  if (token_count(text) == 0) throw Error(ErrorCode::invalid_input, "cannot synthesize empty text");
  auto it = std::ranges::find(voices_, voice_id, &VoiceDescriptor::voice_id);
  if (it == voices_.end()) throw Error(ErrorCode::unknown_voice, "unknown voice '" + voice_id + "'");
  Synthesis out;
  out.env = encode_sim_audio(text, *it);
  out.duration_ms = compute_duration(text, *it);
  out.processing_ms = model_.evaluate(token_count(text), out.duration_ms);
  if (mode_ == TimeMode::wallclock) {
    if (slots_) slots_->acquire();
    sleep_for_processing(out.processing_ms);
    if (slots_) slots_->release();
  }
  return out;
}

BuiltinAgent::BuiltinAgent(Kind kind, LatencyModel model, TimeMode mode)
    : kind_(kind), model_(model), mode_(mode) {
  model_.validate();
}

std::unique_ptr<BuiltinAgent> BuiltinAgent::make(std::string_view name, LatencyModel model, TimeMode mode) {
  if (name.starts_with("builtin:")) name.remove_prefix(8);
  Kind kind;
  if (name == "triage") {
    kind = Kind::triage;
  } else if (name == "anamnesis") {
    kind = Kind::anamnesis;
  } else if (name == "echo") {
    kind = Kind::echo;
  } else {
    throw Error(ErrorCode::config_error, "unknown builtin agent '" + std::string(name) + "'");
  }
  return std::make_unique<BuiltinAgent>(kind, model, mode);
}

std::vector<std::string> BuiltinAgent::step(const std::string& sender_id, std::string_view message) {
  std::lock_guard lock(mu_);
  switch (kind_) {
    case Kind::triage: {
      auto turn = agents::triage_step(triage_[sender_id], message);
      triage_[sender_id] = turn.state;
      return turn.replies;
    }
    case Kind::anamnesis: {
      auto turn = agents::anamnesis_step(anamnesis_[sender_id], message);
      anamnesis_[sender_id] = turn.state;
      return turn.replies;
    }
    case Kind::echo: {
      std::string text = normalize_whitespace(message);
      if (text.empty() || text == agents::kRepromptTrigger) return {std::string(agents::kRepromptReply)};
      return {text};
    }
  }
  return {};
}

AgentReply BuiltinAgent::respond(const std::string& sender_id, std::string_view message) {
  AgentReply out{step(sender_id, message), model_.evaluate(token_count(message), 0)};
  if (mode_ == TimeMode::wallclock) sleep_for_processing(out.processing_ms);
  return out;
}

void BuiltinAgent::forget(const std::string& sender_id) {
  std::lock_guard lock(mu_);
  triage_.erase(sender_id);
  anamnesis_.erase(sender_id);
}

void AgentRouter::add(const std::string& agent_id, std::shared_ptr<ConversationalAgent> agent) {
  agents_[agent_id] = std::move(agent);
}

std::shared_ptr<ConversationalAgent> AgentRouter::find(const std::string& agent_id) const {
  auto it = agents_.find(agent_id);
  return it == agents_.end() ? nullptr : it->second;
}

AgentReply AgentRouter::respond(const std::string& agent_id, const std::string& sender_id,
                                std::string_view message) const {
  auto agent = find(agent_id);
  if (!agent) throw Error(ErrorCode::unknown_agent, "unknown agent '" + agent_id + "'");
  return agent->respond(sender_id, message);
}

}  // namespace voxhub
