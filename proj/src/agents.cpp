#include "voxhub/agents.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <utility>

#include "voxhub/error.hpp"
#include "voxhub/tokens.hpp"

namespace voxhub::agents {

namespace {

constexpr std::array<std::pair<std::string_view, int>, 27> kNumberWords{{
    {"zero", 0},     {"one", 1},        {"two", 2},       {"three", 3},     {"four", 4},
    {"five", 5},     {"six", 6},        {"seven", 7},     {"eight", 8},     {"nine", 9},
    {"ten", 10},     {"eleven", 11},    {"twelve", 12},   {"thirteen", 13}, {"fourteen", 14},
    {"fifteen", 15}, {"sixteen", 16},   {"seventeen", 17}, {"eighteen", 18}, {"nineteen", 19},
    {"twenty", 20},  {"thirty", 30},    {"forty", 40},    {"fifty", 50},    {"sixty", 60},
    {"seventy", 70}, {"ninety", 90},
}};

constexpr std::array<std::pair<std::string_view, double>, 5> kUnits{{
    {"minute", 1.0 / 60.0}, {"hour", 1.0}, {"day", 24.0}, {"week", 168.0}, {"month", 720.0},
}};

constexpr std::array<std::string_view, 9> kYesWords{"yes", "yeah", "yep", "yup", "sure",
                                                    "correct", "definitely", "affirmative", "y"};
constexpr std::array<std::string_view, 7> kNoWords{"no", "nope", "nah", "not", "never", "none", "n"};

/// Lowercased words with surrounding punctuation removed; '/' and '-' split.
std::vector<std::string> words(std::string_view text) {
  std::string cleaned(text);
  for (char& c : cleaned) {
    if (c == '/' || c == '-') c = ' ';
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  std::vector<std::string> out;
  for (std::string& w : split_tokens(cleaned)) {
    auto keep = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '.'; };
    std::size_t b = 0, e = w.size();
    while (b < e && !keep(w[b])) ++b;
    while (e > b && !std::isalnum(static_cast<unsigned char>(w[e - 1]))) --e;
    if (e > b) out.push_back(w.substr(b, e - b));
  }
  return out;
}

std::optional<int> number_word(std::string_view w) {
  for (auto [name, value] : kNumberWords)
    if (name == w) return value;
  return std::nullopt;
}

std::optional<double> numeric(std::string_view w) {
  if (w.empty() || !std::isdigit(static_cast<unsigned char>(w.front()))) return std::nullopt;
  double value = 0;
  auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), value);
  if (ec != std::errc{} || ptr != w.data() + w.size()) return std::nullopt;
  return value;
}

std::optional<double> unit_factor(std::string_view w) {
  for (auto [name, factor] : kUnits)
    if (w == name || (w.size() == name.size() + 1 && w.starts_with(name) && w.back() == 's'))
      return factor;
  return std::nullopt;
}

template <std::size_t N>
bool in(const std::array<std::string_view, N>& set, std::string_view w) {
  for (auto s : set)
    if (s == w) return true;
  return false;
}

std::string trimmed(std::string_view text) { return normalize_whitespace(text); }

bool is_reprompt(std::string_view text) {
  std::string t = trimmed(text);
  return t.empty() || t == kRepromptTrigger;
}

std::string yes_no(bool v) { return v ? "yes" : "no"; }

// Triage script.
constexpr std::string_view kTriageWelcome = "Welcome to triage. What symptom brings you in today?";
constexpr std::string_view kAskSeverity = "On a scale from zero to ten, how severe is it?";
constexpr std::string_view kAskDuration = "How long have you had this symptom?";
constexpr std::string_view kAskBreathing = "Do you have any difficulty breathing?";
constexpr std::string_view kNotUnderstood = "Sorry, I did not understand.";

// Anamnesis script.
constexpr std::string_view kAnamnesisWelcome =
    "Before we continue, do you still have the symptom you reported at triage?";
constexpr std::string_view kConfirmSymptom = "Do you still have the symptom you reported at triage?";
constexpr std::string_view kAskAllergies = "Do you have any allergies?";
constexpr std::string_view kAskMedications = "Which medications are you currently taking?";
constexpr std::string_view kAskConditions = "Have you been diagnosed with any medical conditions in the past?";

std::string retry_reply(std::string_view question) {
  return std::string(kNotUnderstood) + " " + std::string(question);
}

std::string colour_announcement(ColourCode code) {
  return "Your priority colour code is " + std::string(to_string(code)) + ".";
}

}  // namespace

std::string_view to_string(ColourCode code) {
  switch (code) {
    case ColourCode::cyan: return "cyan";
    case ColourCode::green: return "green";
    case ColourCode::yellow: return "yellow";
    case ColourCode::orange: return "orange";
    case ColourCode::red: return "red";
  }
  return "?";
}

std::optional<ColourCode> colour_from_string(std::string_view name) {
  for (ColourCode c : {ColourCode::cyan, ColourCode::green, ColourCode::yellow, ColourCode::orange,
                       ColourCode::red})
    if (to_string(c) == name) return c;
  return std::nullopt;
}

std::optional<int> extract_severity(std::string_view text) {
  std::vector<std::string> ws = words(text);
  for (const auto& w : ws) {
    bool digits = !w.empty() && std::ranges::all_of(w, [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
    if (!digits) continue;
    int value = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), value);
    if (ec == std::errc{} && value >= 0 && value <= 10) return value;
  }
  for (const auto& w : ws)
    if (auto v = number_word(w); v && *v <= 10) return v;
  return std::nullopt;
}

std::optional<double> extract_duration_hours(std::string_view text) {
  std::vector<std::string> ws = words(text);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    std::optional<double> amount = numeric(ws[i]);
    if (!amount)
      if (auto v = number_word(ws[i])) amount = *v;
    std::optional<double> unit = i + 1 < ws.size() ? unit_factor(ws[i + 1]) : std::nullopt;
    if (!amount && (ws[i] == "a" || ws[i] == "an") && unit) amount = 1.0;
    if (!amount) continue;
    return *amount * unit.value_or(1.0);
  }
  return std::nullopt;
}

std::optional<bool> extract_yes_no(std::string_view text) {
  for (const auto& w : words(text)) {
    if (in(kYesWords, w)) return true;
    if (in(kNoWords, w)) return false;
  }
  return std::nullopt;
}

ColourCode assign_colour(const TriageSlots& s) {
  if (!s.symptom || !s.severity || !s.duration_hours || !s.breathing_difficulty)
    throw Error(ErrorCode::incomplete_triage, "triage slots are not all filled");
  if (*s.breathing_difficulty) return ColourCode::red;
  if (*s.severity >= 8) return ColourCode::orange;
  if (*s.severity >= 5 || *s.duration_hours >= 48.0) return ColourCode::yellow;
  if (*s.severity >= 1) return ColourCode::green;
  return ColourCode::cyan;
}

TriageTurn triage_step(const TriageState& state, std::string_view user_text) {
  using Step = TriageState::Step;
  TriageTurn out{state, {}};
  TriageState& next = out.state;

  if (state.step == Step::greet) {
    next.step = Step::ask_symptom;
    out.replies.emplace_back(kTriageWelcome);
    return out;
  }
  if (state.step == Step::done) {
    out.replies.push_back("Your triage is complete. " + colour_announcement(*state.code));
    return out;
  }
  if (is_reprompt(user_text)) {
    out.replies.emplace_back(kRepromptReply);
    return out;
  }

  // Each question: try to fill the slot; after kMaxRetries misses use a default.
  bool exhausted = state.retries >= kMaxRetries;
  auto advance = [&](Step to, std::string_view question) {
    next.step = to;
    next.retries = 0;
    if (!question.empty()) out.replies.emplace_back(question);
  };
  auto reask = [&](std::string_view question) {
    ++next.retries;
    out.replies.push_back(retry_reply(question));
  };

  switch (state.step) {
    case Step::ask_symptom: {
      std::string symptom = trimmed(user_text);
      next.slots.symptom = symptom.empty() ? "unspecified" : symptom;
      advance(Step::ask_severity, kAskSeverity);
      break;
    }
    case Step::ask_severity:
      if (auto v = extract_severity(user_text); v || exhausted) {
        next.slots.severity = v.value_or(5);
        advance(Step::ask_duration, kAskDuration);
      } else {
        reask(kAskSeverity);
      }
      break;
    case Step::ask_duration:
      if (auto v = extract_duration_hours(user_text); v || exhausted) {
        next.slots.duration_hours = v.value_or(0.0);
        advance(Step::ask_breathing, kAskBreathing);
      } else {
        reask(kAskDuration);
      }
      break;
    case Step::ask_breathing:
      if (auto v = extract_yes_no(user_text); v || exhausted) {
        next.slots.breathing_difficulty = v.value_or(false);
        next.code = assign_colour(next.slots);
        advance(Step::done, {});
        out.replies.push_back("Thank you. " + colour_announcement(*next.code) +
                              " Please proceed to the anamnesis room.");
      } else {
        reask(kAskBreathing);
      }
      break;
    case Step::greet:
    case Step::done: break;
  }
  return out;
}

std::string anamnesis_summary(const AnamnesisState& state) {
  if (state.step != AnamnesisState::Step::done)
    throw Error(ErrorCode::invalid_input, "anamnesis is not complete");
  const AnamnesisSlots& s = state.slots;
  return "Summary of your history: symptom still present: " + yes_no(*s.symptom_confirmed) +
         "; allergies: " + *s.allergies + "; medications: " + *s.medications +
         "; prior conditions: " + *s.prior_conditions + ".";
}

AnamnesisTurn anamnesis_step(const AnamnesisState& state, std::string_view user_text) {
  using Step = AnamnesisState::Step;
  AnamnesisTurn out{state, {}};
  AnamnesisState& next = out.state;

  if (state.step == Step::greet) {
    next.step = Step::confirm_symptom;
    out.replies.emplace_back(kAnamnesisWelcome);
    return out;
  }
  if (state.step == Step::done) {
    out.replies.push_back("Your medical history is complete. " + anamnesis_summary(state));
    return out;
  }
  if (is_reprompt(user_text)) {
    out.replies.emplace_back(kRepromptReply);
    return out;
  }

  bool exhausted = state.retries >= kMaxRetries;
  std::string answer = trimmed(user_text);
  auto advance = [&](Step to, std::string_view question) {
    next.step = to;
    next.retries = 0;
    if (!question.empty()) out.replies.emplace_back(question);
  };
  // Free-text slots take the answer verbatim; blank answers were handled as
  // re-prompts above.
  auto fill_text = [&](std::optional<std::string>& slot, Step to, std::string_view question) {
    slot = answer;
    advance(to, question);
  };

  switch (state.step) {
    case Step::confirm_symptom:
      if (auto v = extract_yes_no(user_text); v || exhausted) {
        next.slots.symptom_confirmed = v.value_or(false);
        advance(Step::ask_allergies, kAskAllergies);
      } else {
        ++next.retries;
        out.replies.push_back(retry_reply(kConfirmSymptom));
      }
      break;
    case Step::ask_allergies:
      fill_text(next.slots.allergies, Step::ask_medications, kAskMedications);
      break;
    case Step::ask_medications:
      fill_text(next.slots.medications, Step::ask_conditions, kAskConditions);
      break;
    case Step::ask_conditions:
      fill_text(next.slots.prior_conditions, Step::done, {});
      out.replies.push_back("Thank you. " + anamnesis_summary(next));
      break;
    case Step::greet:
    case Step::done: break;
  }
  return out;
}

}  // namespace voxhub::agents
