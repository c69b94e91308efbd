#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "afr/features.h"
#include "afr/reward.h"
#include "afr/trace.h"

namespace afr {

struct StepResult {
  double reward = 0.0;
  std::optional<StateObservation> next_obs;  // absent once done
  bool done = false;
};

// Chunk-level streaming episode over one trace. The trace must outlive the
// environment; profile and normalization are copied.
class StreamingEnv {
 public:
  StreamingEnv() = default;

  // Starts at chunk 0 with the original frame rate as the last decision.
  StateObservation Reset(const VideoTrace& trace, const QoEProfile& profile,
                         const NormalizationStats& norm);

  // Throws EpisodeFinished after the last chunk, ActionOutOfRange for a level
  // outside [1, m].
  StepResult Step(int level);

  // Observation for the chunk at the cursor. Only meaningful before done.
  const StateObservation& observation() const { return obs_; }
  bool done() const { return done_; }
  int cursor() const { return cursor_; }
  int last_level() const { return last_level_; }
  const VideoTrace* trace() const { return trace_; }
  int level_count() const { return trace_ ? trace_->level_count() : 0; }

 private:
  const VideoTrace* trace_ = nullptr;
  std::optional<FrameRateLadder> ladder_;
  QoEProfile profile_;
  NormalizationStats norm_;
  StateObservation obs_;
  int cursor_ = 0;
  int last_level_ = 1;
  bool done_ = true;
};

struct ThroughputReport {
  double chunks_per_sec = 0.0;
  double simulated_hours_per_minute = 0.0;
  std::int64_t chunks_stepped = 0;
  double wall_seconds = 0.0;
};

// Steps uniformly random-policy episodes until `seconds` of wall time pass.
// Throws EmptyDataset.
ThroughputReport ThroughputBenchmark(std::span<const VideoTrace> dataset,
                                     double seconds, std::uint64_t seed = 1);

}  // namespace afr
