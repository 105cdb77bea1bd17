#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "voxhub/latency_model.hpp"
#include "voxhub/protocol.hpp"

namespace voxhub {

/// Inputs of one turn: STT time, agent time, per-chunk audio durations and
/// per-chunk synthesis times. Synthesis times are either listed explicitly
/// in `processing` or produced by `tts_model` from the durations (and from
/// `tokens` for per-token models).
struct TurnSpec {
  Millis stt_ms = 0;
  Millis agent_ms = 0;
  std::vector<Millis> durations;
  std::vector<Millis> processing;
  std::optional<LatencyModel> tts_model;
  std::vector<std::size_t> tokens;
  Millis transport_ms = 0;

  void validate() const;
  std::vector<Millis> resolved_processing() const;
};

/// ready[i]: chunk i is available to the client; start/end: playback window;
/// gaps[i-1] = start[i] - end[i-1] for i >= 1.
struct Timeline {
  std::vector<Millis> ready;
  std::vector<Millis> start;
  std::vector<Millis> end;
  std::vector<Millis> gaps;
  Millis first_audio_ms = 0;
  bool masked = true;

  bool operator==(const Timeline&) const = default;
};

/// Predictive path: sequential synthesis, play-on-arrival, gapless when
/// possible. Throws empty_turn for zero chunks.
Timeline schedule(const TurnSpec& spec);

/// Descriptive path: playback timeline from observed arrival times.
Timeline timeline_from_ready(std::span<const Millis> ready, std::span<const Millis> durations);

bool is_masked(const Timeline& tl, Millis tolerance_ms);

/// Sufficient condition for masking: p[i] <= d[i-1] for every i >= 1.
bool masking_condition(const TurnSpec& spec);

struct MonolithicComparison {
  Millis first_audio_chunked = 0;
  Millis first_audio_mono = 0;
  Millis saving_ms = 0;
};

/// Compares chunked streaming with synthesizing the whole reply at once.
/// Needs an additive tts_model; otherwise throws cannot_compare.
MonolithicComparison compare_monolithic(const TurnSpec& spec);

TurnReport make_turn_report(Millis stt_ms, Millis agent_ms, std::vector<Millis> tts_ms,
                            std::vector<Millis> durations, const Timeline& tl,
                            Millis threshold_ms = kDefaultThresholdMs);

struct SweepGrid {
  std::vector<double> rtf;
  std::vector<Millis> stt_ms;
  std::vector<Millis> agent_ms;
  std::vector<std::size_t> n_chunks;
  std::vector<Millis> chunk_ms;
  Millis transport_ms = 0;
};

struct SweepRow {
  double rtf = 0.0;
  Millis stt_ms = 0;
  Millis agent_ms = 0;
  std::size_t n_chunks = 0;
  Millis chunk_ms = 0;
  Millis first_audio_ms = 0;
  Millis max_gap_ms = 0;
  bool masked = true;
};

/// Cartesian product of the grid with equal-length chunks; an empty axis
/// yields an empty table.
std::vector<SweepRow> sweep(const SweepGrid& grid);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace voxhub
