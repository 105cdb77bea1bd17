#pragma once

#include "json.hpp"

#include "voxhub/catalog.hpp"
#include "voxhub/protocol.hpp"

namespace voxhub {

void to_json(nlohmann::json& j, const VoiceDescriptor& v);
void from_json(const nlohmann::json& j, VoiceDescriptor& v);
void to_json(nlohmann::json& j, const AgentDescriptor& a);
void from_json(const nlohmann::json& j, AgentDescriptor& a);
void to_json(nlohmann::json& j, const TurnReport& r);
void from_json(const nlohmann::json& j, TurnReport& r);

}  // namespace voxhub
