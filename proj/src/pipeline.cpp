#include "voxhub/pipeline.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "voxhub/error.hpp"

namespace voxhub {

namespace {

bool any_negative(std::span<const Millis> values) {
  return std::ranges::any_of(values, [](Millis v) { return v < 0; });
}

}  // namespace

void TurnSpec::validate() const {
  if (durations.empty()) throw Error(ErrorCode::empty_turn, "turn has no chunks");
  if (stt_ms < 0 || agent_ms < 0 || transport_ms < 0 || any_negative(durations) ||
      any_negative(processing))
    throw Error(ErrorCode::invalid_input, "turn timings must be non-negative");
  if (tts_model) {
    if (!processing.empty())
      throw Error(ErrorCode::invalid_input, "give either explicit processing times or a model");
    tts_model->validate();
    if (tts_model->kind == LatencyModel::Kind::per_token && tokens.size() != durations.size())
      throw Error(ErrorCode::invalid_input, "per-token model needs a token count per chunk");
  } else if (processing.size() != durations.size()) {
    throw Error(ErrorCode::invalid_input, "need one processing time per chunk");
  }
}

std::vector<Millis> TurnSpec::resolved_processing() const {
  validate();
  if (!tts_model) return processing;
  std::vector<Millis> out(durations.size());
  for (std::size_t i = 0; i < durations.size(); ++i)
    out[i] = tts_model->evaluate(tokens.empty() ? 0 : tokens[i], durations[i]);
  return out;
}

Timeline timeline_from_ready(std::span<const Millis> ready, std::span<const Millis> durations) {
  if (ready.empty()) throw Error(ErrorCode::empty_turn, "turn has no chunks");
  if (ready.size() != durations.size())
    throw Error(ErrorCode::invalid_input, "need one duration per ready time");
  Timeline tl;
  tl.ready.assign(ready.begin(), ready.end());
  for (std::size_t i = 0; i < ready.size(); ++i) {
    Millis begin = i == 0 ? ready[0] : std::max(tl.end[i - 1], ready[i]);
    if (i > 0) tl.gaps.push_back(begin - tl.end[i - 1]);
    tl.start.push_back(begin);
    tl.end.push_back(begin + durations[i]);
  }
  tl.first_audio_ms = tl.start.front();
  tl.masked = is_masked(tl, 0);
  return tl;
}

Timeline schedule(const TurnSpec& spec) {
  std::vector<Millis> processing = spec.resolved_processing();
  std::vector<Millis> ready(processing.size());
  Millis clock = spec.stt_ms + spec.agent_ms;
  for (std::size_t i = 0; i < processing.size(); ++i) {
    clock += processing[i];
    ready[i] = clock + spec.transport_ms;
  }
  return timeline_from_ready(ready, spec.durations);
}

bool is_masked(const Timeline& tl, Millis tolerance_ms) {
  return std::ranges::all_of(tl.gaps, [&](Millis g) { return g <= tolerance_ms; });
}

bool masking_condition(const TurnSpec& spec) {
  std::vector<Millis> processing = spec.resolved_processing();
  for (std::size_t i = 1; i < processing.size(); ++i)
    if (processing[i] > spec.durations[i - 1]) return false;
  return true;
}

MonolithicComparison compare_monolithic(const TurnSpec& spec) {
  if (!spec.tts_model || !spec.tts_model->is_additive())
    throw Error(ErrorCode::cannot_compare,
                "monolithic comparison needs a per-token or proportional synthesis model");
  MonolithicComparison out;
  out.first_audio_chunked = schedule(spec).first_audio_ms;
  Millis total_duration = std::accumulate(spec.durations.begin(), spec.durations.end(), Millis{0});
  std::size_t total_tokens = std::accumulate(spec.tokens.begin(), spec.tokens.end(), std::size_t{0});
  out.first_audio_mono = spec.stt_ms + spec.agent_ms +
                         spec.tts_model->evaluate(total_tokens, total_duration) + spec.transport_ms;
  out.saving_ms = out.first_audio_mono - out.first_audio_chunked;
  return out;
}

TurnReport make_turn_report(Millis stt_ms, Millis agent_ms, std::vector<Millis> tts_ms,
                            std::vector<Millis> durations, const Timeline& tl, Millis threshold_ms) {
  TurnReport r;
  r.stt_ms = stt_ms;
  r.agent_ms = agent_ms;
  r.tts_ms_per_chunk = std::move(tts_ms);
  r.chunk_durations_ms = std::move(durations);
  r.first_audio_ms = tl.first_audio_ms;
  r.gaps_ms = tl.gaps;
  r.masked = tl.masked;
  r.threshold_ms = threshold_ms;
  r.threshold_exceeded = r.first_audio_ms > threshold_ms;
  return r;
}

std::vector<SweepRow> sweep(const SweepGrid& grid) {
  std::vector<SweepRow> rows;
  for (double rtf : grid.rtf)
    for (Millis stt : grid.stt_ms)
      for (Millis agent : grid.agent_ms)
        for (std::size_t n : grid.n_chunks)
          for (Millis chunk : grid.chunk_ms) {
            TurnSpec spec;
            spec.stt_ms = stt;
            spec.agent_ms = agent;
            spec.durations.assign(n, chunk);
            spec.tts_model = LatencyModel::proportional(rtf);
            spec.transport_ms = grid.transport_ms;
            Timeline tl = schedule(spec);
            Millis max_gap = tl.gaps.empty() ? 0 : std::ranges::max(tl.gaps);
            rows.push_back({rtf, stt, agent, n, chunk, tl.first_audio_ms, max_gap, tl.masked});
          }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "rtf,stt_ms,agent_ms,n_chunks,chunk_ms,first_audio_ms,max_gap_ms,masked\n";
  for (const SweepRow& r : rows) {
    out << r.rtf << ',' << r.stt_ms << ',' << r.agent_ms << ',' << r.n_chunks << ',' << r.chunk_ms
        << ',' << r.first_audio_ms << ',' << r.max_gap_ms << ',' << (r.masked ? "true" : "false")
        << '\n';
  }
}

}  // namespace voxhub
