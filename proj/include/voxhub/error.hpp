#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace voxhub {

enum class ErrorCode {
  invalid_input,
  unsupported_format,
  malformed_payload,
  frame_too_large,
  protocol_error,
  empty_turn,
  cannot_compare,
  transcription_failed,
  backend_unavailable,
  unknown_voice,
  unknown_agent,
  unknown_session,
  incomplete_triage,
  config_error,
  busy,
  turn_in_progress,
  bad_audio,
};

/// Wire name of an error code, e.g. "frame-too-large".
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace voxhub
