#include "voxhub/latency_model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "voxhub/error.hpp"

namespace voxhub {

LatencyModel LatencyModel::fixed(Millis base_ms) {
  LatencyModel m;
  m.kind = Kind::fixed;
  m.base_ms = base_ms;
  return m;
}

LatencyModel LatencyModel::per_token(Millis base_ms, Millis ms_per_token) {
  LatencyModel m;
  m.kind = Kind::per_token;
  m.base_ms = base_ms;
  m.ms_per_token = ms_per_token;
  return m;
}

LatencyModel LatencyModel::proportional(double rtf) {
  LatencyModel m;
  m.kind = Kind::proportional;
  m.rtf = rtf;
  return m;
}

Millis LatencyModel::evaluate(std::size_t tokens, Millis duration_ms) const {
  Millis value = 0;
  switch (kind) {
    case Kind::fixed: value = base_ms; break;
    case Kind::per_token: value = base_ms + ms_per_token * static_cast<Millis>(tokens); break;
    case Kind::proportional:
      value = static_cast<Millis>(std::llround(rtf * static_cast<double>(duration_ms)));
      break;
  }
  if (jitter_ms > 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tokens), static_cast<std::uint32_t>(duration_ms),
                      static_cast<std::uint32_t>(duration_ms >> 32)};
    std::mt19937_64 rng(seq);
    value += std::uniform_int_distribution<Millis>(0, jitter_ms)(rng);
  }
  return value;
}

void LatencyModel::validate() const {
  if (base_ms < 0 || ms_per_token < 0 || rtf < 0.0 || jitter_ms < 0 || !std::isfinite(rtf))
    throw Error(ErrorCode::config_error, "latency model parameters must be non-negative");
  bool ok = true;
  switch (kind) {
    case Kind::fixed: ok = ms_per_token == 0 && rtf == 0.0; break;
    case Kind::per_token: ok = rtf == 0.0; break;
    case Kind::proportional: ok = base_ms == 0 && ms_per_token == 0; break;
  }
  if (!ok)
    throw Error(ErrorCode::config_error,
                "latency model '" + std::string(to_string(kind)) + "' sets fields it does not use");
}

std::string_view to_string(LatencyModel::Kind kind) {
  switch (kind) {
    case LatencyModel::Kind::fixed: return "fixed";
    case LatencyModel::Kind::per_token: return "per_token";
    case LatencyModel::Kind::proportional: return "proportional";
  }
  return "?";
}

LatencyModel::Kind latency_kind_from_string(std::string_view name) {
  if (name == "fixed") return LatencyModel::Kind::fixed;
  if (name == "per_token") return LatencyModel::Kind::per_token;
  if (name == "proportional") return LatencyModel::Kind::proportional;
  throw Error(ErrorCode::config_error, "unknown latency model '" + std::string(name) + "'");
}

LatencyModel default_stt_model() { return LatencyModel::fixed(kDefaultSttMs); }
LatencyModel default_agent_model() { return LatencyModel::fixed(kDefaultAgentMs); }
LatencyModel default_tts_model() { return LatencyModel::proportional(kDefaultTtsRtf); }

}  // namespace voxhub
