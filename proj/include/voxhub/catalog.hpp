#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace voxhub {

using Millis = std::int64_t;

/// A selectable TTS voice and the duration model of the audio it produces.
struct VoiceDescriptor {
  std::string voice_id;
  std::string display_name;
  Millis ms_per_token = 400;
  Millis base_ms = 120;

  bool operator==(const VoiceDescriptor&) const = default;
};

/// A conversational agent. `endpoint` is either "builtin:<name>" or an
/// http(s) URL speaking the reply-webhook protocol.
struct AgentDescriptor {
  std::string agent_id;
  std::string display_name;
  std::string endpoint;

  bool operator==(const AgentDescriptor&) const = default;
};

struct Catalog {
  std::vector<AgentDescriptor> agents;
  std::vector<VoiceDescriptor> voices;

  bool operator==(const Catalog&) const = default;

  const AgentDescriptor* find_agent(const std::string& id) const;
  const VoiceDescriptor* find_voice(const std::string& id) const;
};

/// Sorts both lists by id and rejects duplicates with config_error.
Catalog make_catalog(std::vector<AgentDescriptor> agents,
                     std::vector<VoiceDescriptor> voices);

}  // namespace voxhub
