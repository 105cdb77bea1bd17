#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "voxhub/catalog.hpp"

namespace voxhub {

/// Processing-time generator for a mock backend.
///
///   fixed        base_ms
///   per_token    base_ms + ms_per_token * tokens
///   proportional round(rtf * audio_duration_ms)
///
/// With jitter_ms > 0 a uniform offset in [0, jitter_ms] is added. The
/// offset is a pure function of (seed, tokens, duration), so equal inputs
/// always evaluate to equal times.
struct LatencyModel {
  enum class Kind { fixed, per_token, proportional };

  Kind kind = Kind::fixed;
  Millis base_ms = 0;
  Millis ms_per_token = 0;
  double rtf = 0.0;
  Millis jitter_ms = 0;
  std::uint64_t seed = 0;

  bool operator==(const LatencyModel&) const = default;

  static LatencyModel fixed(Millis base_ms);
  static LatencyModel per_token(Millis base_ms, Millis ms_per_token);
  static LatencyModel proportional(double rtf);

  Millis evaluate(std::size_t tokens, Millis duration_ms) const;

  /// True when a sum of chunk times can be replaced by one evaluation over
  /// the whole reply (per_token and proportional).
  bool is_additive() const noexcept { return kind != Kind::fixed; }

  /// Throws config_error on negative parameters or fields irrelevant to kind.
  void validate() const;
};

std::string_view to_string(LatencyModel::Kind kind);
LatencyModel::Kind latency_kind_from_string(std::string_view name);

/// Shipped profiles. STT: 800 ms fixed. TTS: rtf 0.85, or the 1.7 s fixed
/// CPU figure for monolithic-baseline experiments. Agent: 100 ms fixed.
inline constexpr Millis kDefaultSttMs = 800;
inline constexpr Millis kDefaultAgentMs = 100;
inline constexpr double kDefaultTtsRtf = 0.85;
inline constexpr Millis kCpuTtsMs = 1700;

LatencyModel default_stt_model();
LatencyModel default_agent_model();
LatencyModel default_tts_model();

}  // namespace voxhub
