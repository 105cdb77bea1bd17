#include "voxhub/error.hpp"

namespace voxhub {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::unsupported_format: return "unsupported-format";
    case ErrorCode::malformed_payload: return "malformed-payload";
    case ErrorCode::frame_too_large: return "frame-too-large";
    case ErrorCode::protocol_error: return "protocol";
    case ErrorCode::empty_turn: return "empty-turn";
    case ErrorCode::cannot_compare: return "cannot-compare";
    case ErrorCode::transcription_failed: return "transcription-failed";
    case ErrorCode::backend_unavailable: return "backend-unavailable";
    case ErrorCode::unknown_voice: return "unknown-voice";
    case ErrorCode::unknown_agent: return "unknown-agent";
    case ErrorCode::unknown_session: return "unknown-session";
    case ErrorCode::incomplete_triage: return "incomplete-triage";
    case ErrorCode::config_error: return "config";
    case ErrorCode::busy: return "busy";
    case ErrorCode::turn_in_progress: return "turn-in-progress";
    case ErrorCode::bad_audio: return "bad-audio";
  }
  return "unknown";
}

}  // namespace voxhub
