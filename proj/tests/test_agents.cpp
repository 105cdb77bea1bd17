#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <set>

#include "voxhub/agents.hpp"
#include "voxhub/error.hpp"

using namespace voxhub;
using namespace voxhub::agents;

namespace {

using Strings = std::vector<std::string>;

TriageState triage_after(const Strings& answers, Strings* last_replies = nullptr) {
  TriageState s;
  for (const auto& a : answers) {
    TriageTurn t = triage_step(s, a);
    s = t.state;
    if (last_replies) *last_replies = t.replies;
  }
  return s;
}

AnamnesisState anamnesis_after(const Strings& answers, Strings* last_replies = nullptr) {
  AnamnesisState s;
  for (const auto& a : answers) {
    AnamnesisTurn t = anamnesis_step(s, a);
    s = t.state;
    if (last_replies) *last_replies = t.replies;
  }
  return s;
}

TriageSlots slots(int severity, double hours, bool breathing) {
  return TriageSlots{"pain", severity, hours, breathing};
}

}  // namespace

TEST_CASE("triage examples") {
  TriageTurn first = triage_step(TriageState{}, "hello");
  CHECK(first.state.step == TriageState::Step::ask_symptom);
  CHECK(first.replies == Strings{"Welcome to triage. What symptom brings you in today?"});

  TriageState at_severity = triage_after({"hello", "chest pain"});
  CHECK(at_severity.step == TriageState::Step::ask_severity);
  CHECK(at_severity.slots.symptom == "chest pain");
  TriageTurn sev = triage_step(at_severity, "about seven out of ten");
  CHECK(sev.state.slots.severity == 7);
  CHECK(sev.state.step == TriageState::Step::ask_duration);

  Strings replies;
  TriageState done = triage_after({"hello", "chest pain", "seven", "two hours", "yes"}, &replies);
  CHECK(done.step == TriageState::Step::done);
  CHECK(done.code == ColourCode::red);
  CHECK(done.slots.duration_hours == doctest::Approx(2.0));
  REQUIRE(replies.size() == 1);
  CHECK(replies[0].find("red") != std::string::npos);
}

TEST_CASE("colour rubric") {
  CHECK(assign_colour(slots(0, 0, true)) == ColourCode::red);
  CHECK(assign_colour(slots(9, 1, false)) == ColourCode::orange);
  CHECK(assign_colour(slots(8, 1, false)) == ColourCode::orange);
  CHECK(assign_colour(slots(5, 1, false)) == ColourCode::yellow);
  CHECK(assign_colour(slots(1, 48, false)) == ColourCode::yellow);
  CHECK(assign_colour(slots(2, 1, false)) == ColourCode::green);
  CHECK(assign_colour(slots(0, 0, false)) == ColourCode::cyan);
  CHECK(assign_colour(slots(0, 47.9, false)) == ColourCode::cyan);

  TriageSlots missing = slots(3, 1, false);
  missing.breathing_difficulty.reset();
  try {
    assign_colour(missing);
    FAIL("expected incomplete triage");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::incomplete_triage);
  }
}

TEST_CASE("property: the rubric is total and monotone in severity") {
  const std::vector<ColourCode> order{ColourCode::cyan, ColourCode::green, ColourCode::yellow,
                                      ColourCode::orange, ColourCode::red};
  auto rank = [&](ColourCode c) { return std::find(order.begin(), order.end(), c) - order.begin(); };
  std::set<ColourCode> seen;
  for (bool breathing : {false, true})
    for (double hours : {0.0, 1.0, 24.0, 47.0, 48.0, 500.0}) {
      long previous = -1;
      for (int sev = 0; sev <= 10; ++sev) {
        ColourCode c = assign_colour(slots(sev, hours, breathing));
        seen.insert(c);
        CHECK(rank(c) >= previous);
        previous = rank(c);
      }
    }
  CHECK(seen.size() == 5);
}

TEST_CASE("answer extraction") {
  CHECK(extract_severity("7") == 7);
  CHECK(extract_severity("it is a 10!") == 10);
  CHECK(extract_severity("about seven out of ten") == 7);
  CHECK(extract_severity("42 then 3") == 3);
  CHECK_FALSE(extract_severity("very bad").has_value());
  CHECK_FALSE(extract_severity("eleven").has_value());

  CHECK(extract_duration_hours("two hours") == doctest::Approx(2.0));
  CHECK(extract_duration_hours("3 days") == doctest::Approx(72.0));
  CHECK(extract_duration_hours("a week") == doctest::Approx(168.0));
  CHECK(extract_duration_hours("30 minutes") == doctest::Approx(0.5));
  CHECK(extract_duration_hours("5") == doctest::Approx(5.0));
  CHECK_FALSE(extract_duration_hours("since yesterday").has_value());

  CHECK(extract_yes_no("yes") == true);
  CHECK(extract_yes_no("Yes, a little.") == true);
  CHECK(extract_yes_no("no") == false);
  CHECK(extract_yes_no("not really") == false);
  CHECK_FALSE(extract_yes_no("maybe").has_value());
}

TEST_CASE("unparseable answers re-ask the same question") {
  TriageState at = triage_after({"hello", "headache"});
  TriageTurn t = triage_step(at, "pretty bad");
  CHECK(t.state.step == TriageState::Step::ask_severity);
  CHECK(t.state.retries == 1);
  CHECK(t.state.slots == at.slots);
  REQUIRE(t.replies.size() == 1);
  CHECK(t.replies[0].find("how severe") != std::string::npos);

  TriageTurn reprompt = triage_step(at, kRepromptTrigger);
  CHECK(reprompt.state == at);
  CHECK(reprompt.replies == Strings{std::string(kRepromptReply)});
}

TEST_CASE("fallback defaults after the retry budget") {
  TriageState s = triage_after({"hello", "headache", "?", "?", "?", "?"});
  CHECK(s.step == TriageState::Step::ask_duration);
  CHECK(s.slots.severity == 5);
  s = triage_after({"hello", "headache", "?", "?", "?", "?", "?", "?", "?", "?", "?", "?", "?", "?"});
  CHECK(s.step == TriageState::Step::done);
  CHECK(s.slots.duration_hours == 0.0);
  CHECK(s.slots.breathing_difficulty == false);
  CHECK(s.code == ColourCode::yellow);
}

TEST_CASE("property: progress under garbage answers") {
  std::mt19937 rng(17);
  const Strings garbage{"hmm", "what", "blue", "?", "I am not sure", "seven", "yes", "3 days", "no"};
  for (int i = 0; i < 500; ++i) {
    TriageState t;
    AnamnesisState a;
    int turns = 0;
    while ((t.step != TriageState::Step::done || a.step != AnamnesisState::Step::done) && turns < 5 * 4) {
      t = triage_step(t, garbage[rng() % garbage.size()]).state;
      a = anamnesis_step(a, garbage[rng() % garbage.size()]).state;
      ++turns;
      CHECK(t.retries <= kMaxRetries);
      CHECK(a.retries <= kMaxRetries);
      CHECK(t.code.has_value() == (t.step == TriageState::Step::done));
    }
    CHECK(t.step == TriageState::Step::done);
    CHECK(a.step == AnamnesisState::Step::done);
  }
}

TEST_CASE("anamnesis examples") {
  AnamnesisTurn first = anamnesis_step(AnamnesisState{}, "hi");
  CHECK(first.state.step == AnamnesisState::Step::confirm_symptom);
  CHECK(first.replies == Strings{"Before we continue, do you still have the symptom you reported at triage?"});

  AnamnesisState at_allergies = anamnesis_after({"hi", "yes"});
  CHECK(at_allergies.step == AnamnesisState::Step::ask_allergies);
  AnamnesisTurn none = anamnesis_step(at_allergies, "none");
  CHECK(none.state.slots.allergies == "none");
  CHECK(none.state.step == AnamnesisState::Step::ask_medications);

  Strings replies;
  AnamnesisState done = anamnesis_after({"hi", "yes", "penicillin", "aspirin and ibuprofen", "asthma"}, &replies);
  CHECK(done.step == AnamnesisState::Step::done);
  REQUIRE(replies.size() == 1);
  for (const char* value : {"symptom still present: yes", "penicillin", "aspirin and ibuprofen", "asthma"})
    CHECK(replies[0].find(value) != std::string::npos);
  CHECK(anamnesis_summary(done) == "Summary of your history: symptom still present: yes; allergies: penicillin; "
                                   "medications: aspirin and ibuprofen; prior conditions: asthma.");
  CHECK_THROWS_AS(anamnesis_summary(at_allergies), Error);
}

TEST_CASE("property: determinism") {
  std::mt19937 rng(8);
  const Strings pool{"hello", "chest pain", "seven", "2 days", "no", "yes", "??", "", "nuts", "8"};
  for (int i = 0; i < 200; ++i) {
    Strings script;
    for (int k = 0; k < 8; ++k) script.push_back(pool[rng() % pool.size()]);
    Strings r1, r2;
    CHECK(triage_after(script, &r1) == triage_after(script, &r2));
    CHECK(r1 == r2);
    CHECK(anamnesis_after(script, &r1) == anamnesis_after(script, &r2));
    CHECK(r1 == r2);
  }
}
