#pragma once

#include <array>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "afr/nn.h"
#include "afr/reward.h"
#include "afr/trace.h"

namespace httplib {
class Server;
}

namespace afr {

// Maps a level chosen among `base_count` choices onto `target_count` choices:
// clamp(round_half_up(target_count / base_count * action), 1, target_count).
// Throws InvalidRange.
int TransformAction(int action, int base_count, int target_count);

struct DecisionRequest {
  std::vector<double> frame_diffs;
  std::vector<std::int64_t> sizes_by_level;
  // Mean diffs of the chunks before and after; the chunk's own mean when
  // absent.
  std::optional<std::array<double, 2>> neighbor_mean_diffs;
  int original_fps = 60;
  int last_level = 5;
  std::string qoe_profile_name = "qoe_q";
  std::optional<int> target_levels;
};

struct Decision {
  int level = 1;       // in the target range
  int base_level = 1;  // raw argmax over the network's levels
  double fps_value = 0.0;
  std::vector<double> distribution;
};

// Throws BadRequest.
DecisionRequest DecisionRequestFromJson(std::string_view body);
std::string DecisionRequestToJson(const DecisionRequest& request);
std::string DecisionToJson(const Decision& decision);

// The request that reproduces the simulator's state for one chunk.
DecisionRequest RequestForChunk(const VideoTrace& trace, int chunk_index,
                                int last_level, std::string profile_name);

// Argmax decision; never samples. Throws BadRequest.
Decision Decide(const CheckpointBundle& checkpoint,
                const DecisionRequest& request);

// Greedy walk through the trace feeding each decision back as the last
// level.
std::vector<int> ScheduleVideo(const CheckpointBundle& checkpoint,
                               const VideoTrace& trace);

// One level per chunk: 1 + number of thresholds strictly below the chunk's
// summed frame diffs. Throws BadThresholds.
std::vector<int> EvsoBaseline(const VideoTrace& trace,
                              std::span<const double> thresholds);

// Evenly spaced quantiles of per-chunk diff sums (20/40/60/80th percentiles
// for five levels). Throws EmptyDataset.
std::vector<double> DefaultEvsoThresholds(std::span<const VideoTrace> dataset,
                                          int level_count = kDefaultLevelCount);

// Constant level clamp(round_half_up(fraction * m), 1, m). Throws
// InvalidRange unless 0 < fraction <= 1.
std::vector<int> NaiveBaseline(const VideoTrace& trace, double fraction);

struct PolicyColumn {
  std::string name;
  std::function<std::vector<int>(const VideoTrace&)> schedule;
};

struct TraceScore {
  std::string video_id;
  std::string category;
  std::string policy;
  double fps_pct = 0.0;
  double quality_pct = 0.0;
  double reward = 0.0;
  std::vector<int> levels;
};

struct ReportRow {
  std::string category;  // "overall" for the whole dataset
  std::string policy;
  double fps_pct = 0.0;
  double quality_pct = 0.0;
  double mean_reward = 0.0;
};

struct EvaluationReport {
  std::vector<TraceScore> per_trace;
  std::vector<ReportRow> rows;  // categories sorted, then overall, per policy

  const ReportRow* Find(std::string_view category,
                        std::string_view policy) const;
};

EvaluationReport EvaluatePolicies(std::span<const VideoTrace> dataset,
                                  const QoEProfile& profile,
                                  std::span<const PolicyColumn> policies);

// Columns model, oracle, evso, naive-60, naive-40. EVSO thresholds default to
// the dataset's own quantiles. Throws EmptyDataset.
EvaluationReport Evaluate(const CheckpointBundle& checkpoint,
                          std::span<const VideoTrace> dataset,
                          const QoEProfile& profile,
                          std::optional<std::vector<double>> evso_thresholds = {});

// Header category,policy,fps_pct,quality_pct,mean_reward.
std::string ReportCsv(const EvaluationReport& report);
std::string ReportTable(const EvaluationReport& report);

struct HttpReply {
  int status = 200;
  std::string body;
};

// Stateless per-request decision service over one checkpoint per QoE
// profile. Checkpoints can be swapped while serving.
class DecisionService {
 public:
  explicit DecisionService(std::vector<CheckpointBundle> checkpoints);
  ~DecisionService();

  // Replaces every checkpoint at once; in-flight requests keep the old set.
  void Reload(std::vector<CheckpointBundle> checkpoints);

  HttpReply HandleDecide(std::string_view body) const;
  HttpReply HandleSchedule(std::string_view body) const;
  HttpReply HandleHealth() const;

  // Blocks until Stop(). Throws BindError.
  void Listen(const std::string& host, int port);
  // Binds to an ephemeral port and returns it; serve with ListenAfterBind().
  int BindAny(const std::string& host);
  void ListenAfterBind();
  void Stop();

 private:
  using CheckpointSet = std::vector<CheckpointBundle>;
  std::shared_ptr<const CheckpointSet> Current() const;
  void InstallRoutes();

  mutable std::mutex mutex_;
  std::shared_ptr<const CheckpointSet> checkpoints_;
  std::unique_ptr<httplib::Server> server_;
};

// "host:port". Throws BindError for a malformed address.
std::pair<std::string, int> ParseBindAddress(std::string_view address);

}  // namespace afr
