#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace voxhub::agents {

enum class ColourCode { cyan, green, yellow, orange, red };

std::string_view to_string(ColourCode code);
std::optional<ColourCode> colour_from_string(std::string_view name);

inline constexpr std::string_view kRepromptTrigger = "/reprompt";
inline constexpr std::string_view kRepromptReply = "Sorry, I did not catch that. Could you repeat?";
/// Unparseable answers allowed per question before the slot falls back to
/// its default.
inline constexpr int kMaxRetries = 3;

// ---------------------------------------------------------------------------
// Triage
// ---------------------------------------------------------------------------

struct TriageSlots {
  std::optional<std::string> symptom;
  std::optional<int> severity;
  std::optional<double> duration_hours;
  std::optional<bool> breathing_difficulty;

  bool operator==(const TriageSlots&) const = default;
};

struct TriageState {
  enum class Step { greet, ask_symptom, ask_severity, ask_duration, ask_breathing, done };

  Step step = Step::greet;
  TriageSlots slots;
  std::optional<ColourCode> code;
  int retries = 0;

  bool operator==(const TriageState&) const = default;
};

struct TriageTurn {
  TriageState state;
  std::vector<std::string> replies;
};

TriageTurn triage_step(const TriageState& state, std::string_view user_text);

/// red: breathing difficulty; orange: severity >= 8; yellow: severity >= 5
/// or duration >= 48 h; green: severity >= 1; cyan otherwise.
/// Throws incomplete_triage when a slot is missing.
ColourCode assign_colour(const TriageSlots& slots);

// ---------------------------------------------------------------------------
// Anamnesis
// ---------------------------------------------------------------------------

struct AnamnesisSlots {
  std::optional<bool> symptom_confirmed;
  std::optional<std::string> allergies;
  std::optional<std::string> medications;
  std::optional<std::string> prior_conditions;

  bool operator==(const AnamnesisSlots&) const = default;
};

struct AnamnesisState {
  enum class Step { greet, confirm_symptom, ask_allergies, ask_medications, ask_conditions, done };

  Step step = Step::greet;
  AnamnesisSlots slots;
  int retries = 0;

  bool operator==(const AnamnesisState&) const = default;
};

struct AnamnesisTurn {
  AnamnesisState state;
  std::vector<std::string> replies;
};

AnamnesisTurn anamnesis_step(const AnamnesisState& state, std::string_view user_text);

/// Throws invalid_input unless the dialogue is done.
std::string anamnesis_summary(const AnamnesisState& state);

// ---------------------------------------------------------------------------
// Answer extraction
// ---------------------------------------------------------------------------

/// First integer token in 0..10, else the first number word zero..ten.
std::optional<int> extract_severity(std::string_view text);
/// A number (digits or words) with an optional unit; hours when no unit.
std::optional<double> extract_duration_hours(std::string_view text);
std::optional<bool> extract_yes_no(std::string_view text);

}  // namespace voxhub::agents
