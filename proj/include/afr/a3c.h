#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "afr/env.h"
#include "afr/features.h"
#include "afr/nn.h"
#include "afr/reward.h"

namespace afr {

// One transition shipped from a worker: s_t, a_t (1-based level), r_t.
struct ExperienceSample {
  StateObservation obs;
  int action = 1;
  double reward = 0.0;
  bool is_terminal = false;
};

// Entropy weight, decaying linearly from `start` to `end` over
// `decay_iters` global iterations and constant afterwards.
struct BetaSchedule {
  double start = 1.0;
  double end = 0.1;
  std::int64_t decay_iters = 50000;

  double At(std::int64_t iteration) const;
  static BetaSchedule Constant(double beta) { return {beta, beta, 1}; }
};

struct TrainConfig {
  double gamma = 0.5;
  double alpha = 1e-6;        // actor rate
  double alpha_prime = 5e-7;  // critic rate
  BetaSchedule beta;
  int n_workers = 16;
  int rollout_len = 32;
  std::int64_t max_iterations = 85000;
  std::uint64_t seed = 1;
  int hidden_layers = 3;
  int hidden_units = 128;
  std::int64_t checkpoint_every = 5000;
};

// Throws InvalidRange.
void ValidateConfig(const TrainConfig& config);

// A_t = sum_{i<k} gamma^i r_{t+i} + gamma^k V_boot - V(s_t), where k runs to
// the end of the rollout. Pass bootstrap_value = 0 for a terminal rollout.
// Throws LengthMismatch.
std::vector<double> NStepAdvantages(std::span<const ExperienceSample> samples,
                                    double bootstrap_value,
                                    std::span<const double> values,
                                    double gamma);

enum class ActionMode {
  kSample,  // draw from pi(.|s)
  kGreedy,  // argmax, lowest level on ties
};

// Draws a 1-based level from `probs` by inverse CDF.
int SampleAction(std::span<const double> probs, std::mt19937_64& rng);
int GreedyAction(std::span<const double> probs);

struct Rollout {
  std::vector<ExperienceSample> samples;
  // State after the last sample; absent when the episode ended.
  std::optional<StateObservation> bootstrap_obs;
};

// Steps `env` (which must not be done) for up to rollout_len chunks, stopping
// at the end of the episode.
Rollout WorkerRollout(StreamingEnv& env, const NetworkParams& actor,
                      int rollout_len, std::mt19937_64& rng,
                      ActionMode mode = ActionMode::kSample);

struct UpdateStats {
  double mean_advantage = 0.0;
  double mean_entropy = 0.0;
  double value_loss = 0.0;  // mean squared n-step TD error
  double mean_reward = 0.0;
  int samples = 0;
};

struct Update {
  GradientBlocks actor;   // ascent direction
  GradientBlocks critic;  // descent direction
  UpdateStats stats;
};

// Summed actor and critic gradients over a rollout, with n-step targets
// bootstrapped from the critic. Throws NonFiniteGradient.
Update ComputeUpdate(const Rollout& rollout, const NetworkParams& actor,
                     const NetworkParams& critic, double gamma, double beta);
// Same, reusing the gradient storage already held by `out`.
void ComputeUpdateInto(const Rollout& rollout, const NetworkParams& actor,
                       const NetworkParams& critic, double gamma, double beta,
                       Update& out);

struct GradientMessage {
  int worker = 0;
  std::int64_t snapshot_version = 0;
  double beta = 0.0;
  Update update;
};

// Central owner of the actor and critic parameters. Workers read immutable
// snapshots and submit gradient messages; the store is the only mutator and
// serializes application per parameter set.
class ParameterStore {
 public:
  struct Snapshot {
    std::shared_ptr<const NetworkParams> actor;
    std::shared_ptr<const NetworkParams> critic;
    std::int64_t version = 0;
  };

  ParameterStore(NetworkParams actor, NetworkParams critic, double alpha,
                 double alpha_prime, std::int64_t max_iterations);

  Snapshot Latest() const;

  // Applies the message and returns the global iteration it completed, or
  // nullopt once max_iterations have been applied. Throws NonFiniteGradient
  // without changing the parameters.
  std::optional<std::int64_t> Submit(const GradientMessage& message);

  std::int64_t iterations() const { return applied_.load(); }
  bool finished() const { return claimed_.load() >= max_iterations_; }

 private:
  // A pooled buffer nobody else references, or a fresh one.
  static std::shared_ptr<NetworkParams> FreeBuffer(
      std::vector<std::shared_ptr<NetworkParams>>& pool,
      const std::shared_ptr<NetworkParams>& current);

  const double alpha_;
  const double alpha_prime_;
  const std::int64_t max_iterations_;

  mutable std::mutex publish_mutex_;
  std::shared_ptr<NetworkParams> actor_;
  std::shared_ptr<NetworkParams> critic_;
  std::int64_t version_ = 0;

  std::mutex actor_mutex_;
  std::mutex critic_mutex_;
  std::vector<std::shared_ptr<NetworkParams>> actor_pool_;
  std::vector<std::shared_ptr<NetworkParams>> critic_pool_;

  std::atomic<std::int64_t> claimed_{0};
  std::atomic<std::int64_t> applied_{0};
};

struct MetricsRow {
  std::int64_t iteration = 0;
  double wall_ms = 0.0;
  double mean_reward = 0.0;
  double mean_entropy = 0.0;
  double value_loss = 0.0;
  double beta = 0.0;
};

// CSV with header iteration,wall_ms,mean_reward,mean_entropy,value_loss,beta.
std::string MetricsCsv(std::span<const MetricsRow> rows,
                       bool include_wall_time = true);

struct TrainResult {
  CheckpointBundle final_checkpoint;
  std::vector<MetricsRow> metrics;  // sorted by iteration
};

using ProgressCallback = std::function<void(const MetricsRow&)>;

// Runs n_workers workers against one ParameterStore until max_iterations
// gradient messages are applied. With n_workers == 1 everything runs on the
// calling thread. When checkpoint_dir is non-empty it receives periodic
// iter_<N>.ckpt files, final.ckpt and metrics.csv. Throws EmptyDataset,
// InvalidRange, NonFiniteGradient.
TrainResult Train(std::span<const VideoTrace> dataset,
                  const QoEProfile& profile, const TrainConfig& config,
                  const std::filesystem::path& checkpoint_dir = {},
                  const ProgressCallback& progress = {});

// Mean entropy of pi over every chunk state of `dataset`, with the previous
// decision taken greedily.
double MeanPolicyEntropy(const NetworkParams& actor,
                         std::span<const VideoTrace> dataset,
                         const NormalizationStats& norm);

}  // namespace afr
