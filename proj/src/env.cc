#include "afr/env.h"

#include <chrono>
#include <random>

#include "afr/errors.h"

namespace afr {

StateObservation StreamingEnv::Reset(const VideoTrace& trace,
                                     const QoEProfile& profile,
                                     const NormalizationStats& norm) {
  if (trace.chunks.empty()) throw ValidationError("chunks: trace has no chunks");
  trace_ = &trace;
  ladder_.emplace(FrameRateLadder::ForTrace(trace));
  profile_ = profile;
  norm_ = norm;
  cursor_ = 0;
  last_level_ = trace.level_count();
  done_ = false;
  obs_ = AssembleState(trace, cursor_, last_level_, norm_);
  return obs_;
}

StepResult StreamingEnv::Step(int level) {
  if (done_) throw EpisodeFinished("episode already finished");
  if (level < 1 || level > ladder_->level_count())
    throw ActionOutOfRange("action " + std::to_string(level) +
                           " outside [1, " +
                           std::to_string(ladder_->level_count()) + "]");
  StepResult result;
  result.reward =
      ChunkReward(trace_->chunks[cursor_], level, profile_, *ladder_).total;
  last_level_ = level;
  ++cursor_;
  done_ = cursor_ == trace_->chunk_count();
  result.done = done_;
  if (!done_) {
    obs_ = AssembleState(*trace_, cursor_, last_level_, norm_);
    result.next_obs = obs_;
  }
  return result;
}

ThroughputReport ThroughputBenchmark(std::span<const VideoTrace> dataset,
                                     double seconds, std::uint64_t seed) {
  if (dataset.empty()) throw EmptyDataset("benchmark needs at least one trace");
  using Clock = std::chrono::steady_clock;
  const NormalizationStats norm = ComputeNormStats(dataset);
  const QoEProfile profile = QoEProfile::QualityFirst();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);

  ThroughputReport report;
  double simulated_seconds = 0.0;
  StreamingEnv env;
  const auto start = Clock::now();
  const auto budget = std::chrono::duration<double>(seconds);
  do {
    const VideoTrace& trace = dataset[pick(rng)];
    std::uniform_int_distribution<int> action(1, trace.level_count());
    env.Reset(trace, profile, norm);
    while (!env.done()) {
      env.Step(action(rng));
      ++report.chunks_stepped;
      simulated_seconds += trace.chunk_duration_s;
    }
  } while (Clock::now() - start < budget);

  report.wall_seconds =
      std::chrono::duration<double>(Clock::now() - start).count();
  report.chunks_per_sec = report.chunks_stepped / report.wall_seconds;
  report.simulated_hours_per_minute =
      (simulated_seconds / 3600.0) / (report.wall_seconds / 60.0);
  return report;
}

}  // namespace afr
