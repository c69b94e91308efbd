#include "afr/a3c.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "afr/errors.h"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace afr {
namespace {

// Forward traces and gradients are several MB each; keep them on the heap
// instead of fresh mmaps so repeated iterations do not page-fault.
void KeepLargeBuffersOnHeap() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
  });
#endif
}

bool AllFinite(const GradientBlocks& g) {
  return Eigen::Map<const Eigen::VectorXd>(
             g.values.data(), static_cast<Eigen::Index>(g.values.size()))
      .allFinite();
}

std::string IterationFileName(std::int64_t iteration) {
  char name[32];
  std::snprintf(name, sizeof(name), "iter_%08lld.ckpt",
                static_cast<long long>(iteration));
  return name;
}

}  // namespace

double BetaSchedule::At(std::int64_t iteration) const {
  if (decay_iters <= 0 || iteration >= decay_iters) return end;
  const double frac = static_cast<double>(std::max<std::int64_t>(iteration, 0)) /
                      static_cast<double>(decay_iters);
  return start + (end - start) * frac;
}

void ValidateConfig(const TrainConfig& c) {
  if (!(c.gamma > 0.0 && c.gamma <= 1.0))
    throw InvalidRange("gamma must lie in (0, 1]");
  if (!(c.alpha > 0.0) || !(c.alpha_prime > 0.0))
    throw InvalidRange("learning rates must be positive");
  if (c.n_workers < 1) throw InvalidRange("n_workers must be at least 1");
  if (c.rollout_len < 1) throw InvalidRange("rollout_len must be at least 1");
  if (c.max_iterations < 0) throw InvalidRange("max_iterations must be >= 0");
  if (c.beta.start < 0 || c.beta.end < 0)
    throw InvalidRange("entropy weight must be non-negative");
}

std::vector<double> NStepAdvantages(std::span<const ExperienceSample> samples,
                                    double bootstrap_value,
                                    std::span<const double> values,
                                    double gamma) {
  if (values.size() != samples.size())
    throw LengthMismatch("need one value estimate per sample");
  std::vector<double> advantages(samples.size());
  double ret = bootstrap_value;
  for (std::size_t i = samples.size(); i-- > 0;) {
    ret = samples[i].reward + gamma * ret;
    advantages[i] = ret - values[i];
  }
  return advantages;
}

int SampleAction(std::span<const double> probs, std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return static_cast<int>(i) + 1;
  }
  // Rounding left u above the final cumulative sum: take the last level with
  // non-zero mass.
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return static_cast<int>(i) + 1;
  return static_cast<int>(probs.size());
}

int GreedyAction(std::span<const double> probs) {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) -
                          probs.begin()) +
         1;
}

Rollout WorkerRollout(StreamingEnv& env, const NetworkParams& actor,
                      int rollout_len, std::mt19937_64& rng, ActionMode mode) {
  if (env.done()) throw EpisodeFinished("rollout on a finished episode");
  Rollout rollout;
  rollout.samples.reserve(rollout_len);
  for (int t = 0; t < rollout_len && !env.done(); ++t) {
    ExperienceSample sample;
    sample.obs = env.observation();
    const std::vector<double> probs = ForwardActor(actor, sample.obs).probs;
    sample.action = mode == ActionMode::kGreedy ? GreedyAction(probs)
                                                : SampleAction(probs, rng);
    const StepResult step = env.Step(sample.action);
    sample.reward = step.reward;
    sample.is_terminal = step.done;
    rollout.samples.push_back(std::move(sample));
  }
  if (!env.done()) rollout.bootstrap_obs = env.observation();
  return rollout;
}

Update ComputeUpdate(const Rollout& rollout, const NetworkParams& actor,
                     const NetworkParams& critic, double gamma, double beta) {
  Update update;
  ComputeUpdateInto(rollout, actor, critic, gamma, beta, update);
  return update;
}

void ComputeUpdateInto(const Rollout& rollout, const NetworkParams& actor,
                       const NetworkParams& critic, double gamma, double beta,
                       Update& update) {
  const auto& samples = rollout.samples;
  if (samples.empty()) throw LengthMismatch("update needs at least one sample");
  const int n = static_cast<int>(samples.size());

  std::vector<const StateObservation*> batch;
  std::vector<int> actions;
  batch.reserve(n);
  actions.reserve(n);
  for (const ExperienceSample& s : samples) {
    batch.push_back(&s.obs);
    actions.push_back(s.action);
  }

  const ForwardTrace critic_trace = Forward(critic, batch);
  std::vector<double> values(critic_trace.output.data(),
                             critic_trace.output.data() + n);
  const double bootstrap =
      rollout.bootstrap_obs && !samples.back().is_terminal
          ? ForwardCritic(critic, *rollout.bootstrap_obs).value
          : 0.0;
  const std::vector<double> advantages =
      NStepAdvantages(samples, bootstrap, values, gamma);
  std::vector<double> targets(n);
  for (int i = 0; i < n; ++i) targets[i] = advantages[i] + values[i];

  const ForwardTrace actor_trace = Forward(actor, batch);

  BackwardFromOutputInto(
      actor, actor_trace,
      ActorLogitGradient(actor, actor_trace, actions, advantages, beta),
      update.actor);
  BackwardFromOutputInto(critic, critic_trace,
                         CriticValueGradient(critic, critic_trace, targets),
                         update.critic);
  if (!AllFinite(update.actor) || !AllFinite(update.critic))
    throw NonFiniteGradient("rollout produced a non-finite gradient");

  UpdateStats& st = update.stats;
  st = UpdateStats{};
  st.samples = n;
  for (int i = 0; i < n; ++i) {
    st.mean_advantage += advantages[i];
    st.value_loss += advantages[i] * advantages[i];
    st.mean_reward += samples[i].reward;
    const auto p = actor_trace.probs.col(i);
    st.mean_entropy += Entropy(std::span<const double>(p.data(), p.size()));
  }
  st.mean_advantage /= n;
  st.value_loss /= n;
  st.mean_reward /= n;
  st.mean_entropy /= n;
}

ParameterStore::ParameterStore(NetworkParams actor, NetworkParams critic,
                               double alpha, double alpha_prime,
                               std::int64_t max_iterations)
    : alpha_(alpha),
      alpha_prime_(alpha_prime),
      max_iterations_(max_iterations),
      actor_(std::make_shared<NetworkParams>(std::move(actor))),
      critic_(std::make_shared<NetworkParams>(std::move(critic))) {
  actor_pool_.push_back(actor_);
  critic_pool_.push_back(critic_);
}

ParameterStore::Snapshot ParameterStore::Latest() const {
  std::lock_guard lock(publish_mutex_);
  return {actor_, critic_, version_};
}

std::shared_ptr<NetworkParams> ParameterStore::FreeBuffer(
    std::vector<std::shared_ptr<NetworkParams>>& pool,
    const std::shared_ptr<NetworkParams>& current) {
  // A pooled buffer with use_count 1 is referenced only by the pool; it can
  // no longer be handed out because Latest() only returns the current one.
  for (const auto& buffer : pool)
    if (buffer != current && buffer.use_count() == 1) return buffer;
  pool.push_back(std::make_shared<NetworkParams>(current->spec()));
  return pool.back();
}

std::optional<std::int64_t> ParameterStore::Submit(
    const GradientMessage& message) {
  if (!AllFinite(message.update.actor) || !AllFinite(message.update.critic))
    throw NonFiniteGradient("gradient message from worker " +
                            std::to_string(message.worker) +
                            " contains NaN or infinity");
  const std::int64_t ticket = claimed_.fetch_add(1) + 1;
  if (ticket > max_iterations_) return std::nullopt;

  auto apply = [&](std::mutex& mutex,
                   std::vector<std::shared_ptr<NetworkParams>>& pool,
                   std::shared_ptr<NetworkParams>& current,
                   const GradientBlocks& grads, double rate,
                   StepDirection direction) {
    std::lock_guard lock(mutex);
    std::shared_ptr<NetworkParams> base;
    {
      std::lock_guard publish(publish_mutex_);
      base = current;
    }
    std::shared_ptr<NetworkParams> next = FreeBuffer(pool, base);
    ApplyGradientsInto(*base, grads, rate, direction, *next);
    std::lock_guard publish(publish_mutex_);
    current = std::move(next);
    ++version_;
  };

  try {
    apply(actor_mutex_, actor_pool_, actor_, message.update.actor, alpha_,
          StepDirection::kAscent);
    apply(critic_mutex_, critic_pool_, critic_, message.update.critic,
          alpha_prime_, StepDirection::kDescent);
  } catch (...) {
    claimed_.fetch_sub(1);
    throw;
  }
  applied_.fetch_add(1);
  return ticket;
}

std::string MetricsCsv(std::span<const MetricsRow> rows,
                       bool include_wall_time) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration," << (include_wall_time ? "wall_ms," : "")
      << "mean_reward,mean_entropy,value_loss,beta\n";
  for (const MetricsRow& r : rows) {
    out << r.iteration << ',';
    if (include_wall_time) out << r.wall_ms << ',';
    out << r.mean_reward << ',' << r.mean_entropy << ',' << r.value_loss << ','
        << r.beta << '\n';
  }
  return out.str();
}

TrainResult Train(std::span<const VideoTrace> dataset,
                  const QoEProfile& profile, const TrainConfig& config,
                  const std::filesystem::path& checkpoint_dir,
                  const ProgressCallback& progress) {
  ValidateConfig(config);
  ValidateProfile(profile);
  if (dataset.empty()) throw EmptyDataset("training needs at least one trace");
  const int m = dataset.front().level_count();
  for (const VideoTrace& t : dataset)
    if (t.level_count() != m)
      throw ValidationError("all training traces need the same level count");
  if (!checkpoint_dir.empty()) std::filesystem::create_directories(checkpoint_dir);
  KeepLargeBuffersOnHeap();

  const NormalizationStats norm = ComputeNormStats(dataset);
  NetworkSpec actor_spec;
  actor_spec.head = HeadKind::kActor;
  actor_spec.m_actions = m;
  actor_spec.hidden_layers = config.hidden_layers;
  actor_spec.hidden_units = config.hidden_units;
  actor_spec.input_lengths.back() = m;
  NetworkSpec critic_spec = actor_spec;
  critic_spec.head = HeadKind::kCritic;

  ParameterStore store(BuildNetwork(actor_spec, config.seed),
                       BuildNetwork(critic_spec, config.seed + 1),
                       config.alpha, config.alpha_prime,
                       config.max_iterations);

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  std::mutex log_mutex;
  std::vector<MetricsRow> metrics;
  metrics.reserve(static_cast<std::size_t>(config.max_iterations));
  std::atomic<bool> abort{false};
  std::string abort_reason;

  auto bundle_of = [&](const ParameterStore::Snapshot& snap) {
    return CheckpointBundle{*snap.actor, *snap.critic, norm, profile.name};
  };

  auto worker = [&](int index) {
    std::mt19937_64 rng(config.seed + static_cast<std::uint64_t>(index));
    std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
    StreamingEnv env;
    GradientMessage message;
    message.worker = index;
    std::int64_t current_iteration = 0;
    try {
      while (!abort.load() && !store.finished()) {
        if (env.done()) env.Reset(dataset[pick(rng)], profile, norm);
        const ParameterStore::Snapshot snap = store.Latest();
        const std::int64_t iteration = store.iterations();
        current_iteration = iteration + 1;
        const double beta = config.beta.At(iteration);
        Rollout rollout =
            WorkerRollout(env, *snap.actor, config.rollout_len, rng);
        message.snapshot_version = snap.version;
        message.beta = beta;
        ComputeUpdateInto(rollout, *snap.actor, *snap.critic, config.gamma,
                          beta, message.update);
        const std::optional<std::int64_t> done = store.Submit(message);
        if (!done) break;
        current_iteration = *done;

        const MetricsRow row{
            *done,
            std::chrono::duration<double, std::milli>(Clock::now() - start)
                .count(),
            message.update.stats.mean_reward, message.update.stats.mean_entropy,
            message.update.stats.value_loss, beta};
        {
          std::lock_guard lock(log_mutex);
          metrics.push_back(row);
          if (progress) progress(row);
        }
        if (!checkpoint_dir.empty() && config.checkpoint_every > 0 &&
            *done % config.checkpoint_every == 0)
          SaveCheckpoint(bundle_of(store.Latest()),
                         checkpoint_dir / IterationFileName(*done));
      }
    } catch (const NonFiniteGradient& e) {
      std::lock_guard lock(log_mutex);
      if (!abort.exchange(true))
        abort_reason = "iteration " + std::to_string(current_iteration) +
                       ": " + e.what();
    }
  };

  if (config.n_workers == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(config.n_workers);
    for (int w = 0; w < config.n_workers; ++w) threads.emplace_back(worker, w);
  }

  std::sort(metrics.begin(), metrics.end(),
            [](const MetricsRow& a, const MetricsRow& b) {
              return a.iteration < b.iteration;
            });
  if (!checkpoint_dir.empty()) {
    std::ofstream csv(checkpoint_dir / "metrics.csv", std::ios::trunc);
    csv << MetricsCsv(metrics);
  }
  if (abort.load()) {
    std::fprintf(stderr, "training aborted at %s\n", abort_reason.c_str());
    throw NonFiniteGradient(abort_reason);
  }

  TrainResult result{bundle_of(store.Latest()), std::move(metrics)};
  if (!checkpoint_dir.empty())
    SaveCheckpoint(result.final_checkpoint, checkpoint_dir / "final.ckpt");
  return result;
}

double MeanPolicyEntropy(const NetworkParams& actor,
                         std::span<const VideoTrace> dataset,
                         const NormalizationStats& norm) {
  double total = 0.0;
  std::int64_t count = 0;
  for (const VideoTrace& trace : dataset) {
    int last = trace.level_count();
    for (int k = 0; k < trace.chunk_count(); ++k) {
      const std::vector<double> probs =
          ForwardActor(actor, AssembleState(trace, k, last, norm)).probs;
      total += Entropy(probs);
      ++count;
      last = GreedyAction(probs);
    }
  }
  return count > 0 ? total / static_cast<double>(count) : 0.0;
}

}  // namespace afr
