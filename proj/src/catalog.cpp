#include "voxhub/catalog.hpp"

#include <algorithm>
#include <functional>

#include "voxhub/error.hpp"

namespace voxhub {

namespace {

template <typename T, typename Key>
void sort_unique(std::vector<T>& items, Key key, const char* what) {
  std::ranges::sort(items, {}, key);
  auto dup = std::ranges::adjacent_find(
      items, [&](const T& a, const T& b) { return std::invoke(key, a) == std::invoke(key, b); });
  if (dup != items.end())
    throw Error(ErrorCode::config_error,
                std::string("duplicate ") + what + " id '" + std::invoke(key, *dup) + "'");
}

}  // namespace

const AgentDescriptor* Catalog::find_agent(const std::string& id) const {
  auto it = std::ranges::find(agents, id, &AgentDescriptor::agent_id);
  return it == agents.end() ? nullptr : &*it;
}

const VoiceDescriptor* Catalog::find_voice(const std::string& id) const {
  auto it = std::ranges::find(voices, id, &VoiceDescriptor::voice_id);
  return it == voices.end() ? nullptr : &*it;
}

Catalog make_catalog(std::vector<AgentDescriptor> agents, std::vector<VoiceDescriptor> voices) {
  sort_unique(agents, &AgentDescriptor::agent_id, "agent");
  sort_unique(voices, &VoiceDescriptor::voice_id, "voice");
  for (const auto& v : voices) {
    if (v.ms_per_token < 0 || v.base_ms < 0)
      throw Error(ErrorCode::config_error, "voice '" + v.voice_id + "' has negative timing");
  }
  return Catalog{std::move(agents), std::move(voices)};
}

}  // namespace voxhub
