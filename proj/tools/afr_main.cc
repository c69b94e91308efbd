// afr: command-line front end for trace handling, training, evaluation and
// serving of adaptive frame-rate policies.

#include <cmath>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "afr/a3c.h"
#include "afr/env.h"
#include "afr/errors.h"
#include "afr/features.h"
#include "afr/nn.h"
#include "afr/reward.h"
#include "afr/service.h"
#include "afr/trace.h"

namespace {

std::vector<int> ParseLevels(const std::string& text) {
  std::vector<int> levels;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) levels.push_back(std::stoi(item));
  return levels;
}

std::vector<double> ParseDoubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(std::stod(item));
  return out;
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw afr::IoError("cannot open " + path + " for writing");
  out << text;
}

afr::DecisionService* g_service = nullptr;

void StopOnSignal(int) {
  if (g_service) g_service->Stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive frame-rate policy toolkit"};
  app.require_subcommand(1);

  // trace
  auto* trace_cmd = app.add_subcommand("trace", "Create and check trace files");
  trace_cmd->require_subcommand(1);
  std::string synth_profile = "static", synth_out;
  int synth_chunks = 10, synth_fps = 60;
  std::uint64_t synth_seed = 1;
  auto* synth = trace_cmd->add_subcommand("synth", "Generate a synthetic trace");
  synth->add_option("--profile", synth_profile,
                    "static | dynamic | hybrid | hybrid:<period>")
      ->required();
  synth->add_option("--chunks", synth_chunks, "Number of chunks")->required();
  synth->add_option("--seed", synth_seed, "Generator seed")->required();
  synth->add_option("--fps", synth_fps, "Original frame rate (24, 30, 60)");
  synth->add_option("--out", synth_out, "Output trace path")->required();

  std::string validate_path;
  auto* validate = trace_cmd->add_subcommand("validate", "Validate a trace file");
  validate->add_option("path", validate_path)->required();

  // features
  auto* features_cmd = app.add_subcommand("features", "Luma-difference features");
  features_cmd->require_subcommand(1);
  std::string frames_dir, extract_out;
  double extract_fps = 60;
  auto* extract =
      features_cmd->add_subcommand("extract", "Chunk frame diffs from PGM frames");
  extract->add_option("--frames", frames_dir, "Directory of P5 PGM frames")
      ->required();
  extract->add_option("--fps", extract_fps, "Original frame rate")->required();
  extract->add_option("--out", extract_out, "Output JSON path")->required();
  std::uint64_t correlate_seed = 1;
  int correlate_pairs = 240;
  auto* correlate = features_cmd->add_subcommand(
      "correlate", "Pearson r between Y-diff and SSIM on synthetic pairs");
  correlate->add_option("--seed", correlate_seed)->required();
  correlate->add_option("--pairs", correlate_pairs);

  // reward
  auto* reward_cmd = app.add_subcommand("reward", "QoE reward");
  reward_cmd->require_subcommand(1);
  std::string reward_trace, reward_profile = "qoe_q", reward_levels;
  auto* reward_eval = reward_cmd->add_subcommand("eval", "Score a level schedule");
  reward_eval->add_option("--trace", reward_trace)->required();
  reward_eval->add_option("--profile", reward_profile, "qoe_q | qoe_b | file");
  reward_eval->add_option("--levels", reward_levels,
                          "Comma-separated level per chunk (default: oracle)");

  // sim
  auto* sim_cmd = app.add_subcommand("sim", "Streaming simulator");
  sim_cmd->require_subcommand(1);
  std::string bench_dataset;
  double bench_seconds = 60;
  auto* bench = sim_cmd->add_subcommand("bench", "Simulator throughput");
  bench->add_option("--dataset", bench_dataset)->required();
  bench->add_option("--seconds", bench_seconds);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train an actor-critic policy");
  std::string train_dataset, train_profile = "qoe_q", train_out;
  afr::TrainConfig config;
  train_cmd->add_option("--dataset", train_dataset)->required();
  train_cmd->add_option("--profile", train_profile, "qoe_q | qoe_b | file");
  train_cmd->add_option("--workers", config.n_workers);
  train_cmd->add_option("--iters", config.max_iterations);
  train_cmd->add_option("--seed", config.seed);
  train_cmd->add_option("--out", train_out, "Checkpoint directory")->required();
  train_cmd->add_option("--gamma", config.gamma);
  train_cmd->add_option("--alpha", config.alpha);
  train_cmd->add_option("--alpha-prime", config.alpha_prime);
  train_cmd->add_option("--beta-start", config.beta.start);
  train_cmd->add_option("--beta-end", config.beta.end);
  train_cmd->add_option("--beta-decay-iters", config.beta.decay_iters);
  train_cmd->add_option("--rollout-len", config.rollout_len);
  train_cmd->add_option("--hidden-layers", config.hidden_layers);
  train_cmd->add_option("--hidden-units", config.hidden_units);
  train_cmd->add_option("--checkpoint-every", config.checkpoint_every);

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "HTTP decision service");
  std::vector<std::string> serve_checkpoints;
  std::string bind = "127.0.0.1:8080";
  serve_cmd->add_option("--checkpoint", serve_checkpoints,
                        "Checkpoint file; repeat for one per QoE profile")
      ->required();
  serve_cmd->add_option("--bind", bind);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "FPS%/quality% report");
  std::string eval_checkpoint, eval_dataset, eval_profile = "qoe_q", eval_out,
                                             eval_thresholds;
  eval_cmd->add_option("--checkpoint", eval_checkpoint)->required();
  eval_cmd->add_option("--dataset", eval_dataset)->required();
  eval_cmd->add_option("--profile", eval_profile);
  eval_cmd->add_option("--out", eval_out, "Report CSV path");
  eval_cmd->add_option("--evso-thresholds", eval_thresholds,
                       "Comma-separated cut points (default: dataset quantiles)");

  // baseline
  auto* baseline_cmd = app.add_subcommand("baseline", "Heuristic schedules");
  std::string baseline_kind, baseline_arg, baseline_trace;
  baseline_cmd->add_option("--kind", baseline_kind, "evso | naive")
      ->required()
      ->check(CLI::IsMember({"evso", "naive"}));
  baseline_cmd->add_option(
      "--arg", baseline_arg,
      "naive: fps fraction; evso: comma-separated thresholds (default: "
      "quantiles of the trace)");
  baseline_cmd->add_option("--trace", baseline_trace)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      afr::SynthOptions options;
      options.original_fps = synth_fps;
      const afr::VideoTrace trace = afr::GenerateSynthetic(
          afr::ParseMotionProfile(synth_profile), synth_chunks, synth_seed,
          options);
      afr::SaveTrace(trace, synth_out);
    } else if (validate->parsed()) {
      const afr::VideoTrace trace = afr::LoadTrace(validate_path);
      std::cout << "ok " << trace.video_id << " chunks=" << trace.chunk_count()
                << " levels=" << trace.level_count()
                << " fps=" << trace.original_fps << "\n";
    } else if (extract->parsed()) {
      const std::vector<afr::GrayFrame> frames =
          afr::LoadFrameDirectory(frames_dir);
      const auto per_chunk = static_cast<std::size_t>(
          std::llround(afr::kDefaultChunkSeconds * extract_fps));
      nlohmann::ordered_json out;
      out["original_fps"] = extract_fps;
      out["chunk_duration_s"] = afr::kDefaultChunkSeconds;
      out["chunks"] = nlohmann::ordered_json::array();
      int index = 0;
      for (std::size_t start = 0; start + 1 < frames.size(); start += per_chunk) {
        const std::size_t n = std::min(per_chunk, frames.size() - start);
        if (n < 2) break;
        const auto diffs = afr::ChunkFrameDiffs(
            std::span<const afr::GrayFrame>(frames).subspan(start, n));
        out["chunks"].push_back({{"index", index++}, {"frame_diffs", diffs}});
      }
      WriteText(extract_out, out.dump(1) + "\n");
    } else if (correlate->parsed()) {
      const auto pairs = afr::SyntheticFramePairs(correlate_seed, correlate_pairs);
      std::vector<double> ydiff, ssim;
      for (const auto& p : pairs) {
        ydiff.push_back(p.y_diff);
        ssim.push_back(p.ssim);
      }
      std::printf("seed,pairs,pearson\n%llu,%zu,%.6f\n",
                  static_cast<unsigned long long>(correlate_seed), pairs.size(),
                  afr::PearsonCorrelation(ydiff, ssim));
    } else if (reward_eval->parsed()) {
      const afr::VideoTrace trace = afr::LoadTrace(reward_trace);
      const afr::QoEProfile profile = afr::ResolveProfile(reward_profile);
      const std::vector<int> levels = reward_levels.empty()
                                          ? afr::GreedyOracle(trace, profile)
                                          : ParseLevels(reward_levels);
      const afr::FrameRateLadder ladder = afr::FrameRateLadder::ForTrace(trace);
      const double total = afr::EpisodeReward(trace, levels, profile);
      std::printf("chunk,level,quality,quality_diff,bonus,penalty,energy,total\n");
      for (std::size_t k = 0; k < levels.size(); ++k) {
        const auto r =
            afr::ChunkReward(trace.chunks[k], levels[k], profile, ladder);
        std::printf("%zu,%d,%.6f,%.6f,%.3f,%.3f,%.6f,%.6f\n", k, levels[k],
                    r.quality_term, r.quality_diff_term, r.bonus, r.penalty,
                    r.energy_term, r.total);
      }
      std::printf("episode_reward,%.6f\n", total);
    } else if (bench->parsed()) {
      const auto dataset = afr::LoadDataset(bench_dataset);
      const auto report = afr::ThroughputBenchmark(dataset, bench_seconds);
      std::cout << nlohmann::json{{"chunks_per_sec", report.chunks_per_sec},
                                  {"simulated_hours_per_minute",
                                   report.simulated_hours_per_minute}}
                       .dump()
                << "\n";
    } else if (train_cmd->parsed()) {
      const auto dataset = afr::LoadDataset(train_dataset);
      const afr::QoEProfile profile = afr::ResolveProfile(train_profile);
      const auto result = afr::Train(
          dataset, profile, config, train_out, [&](const afr::MetricsRow& row) {
            if (row.iteration % 500 == 0)
              std::fprintf(stderr,
                           "iter %lld  reward %.3f  entropy %.3f  vloss %.3f  "
                           "beta %.3f\n",
                           static_cast<long long>(row.iteration),
                           row.mean_reward, row.mean_entropy, row.value_loss,
                           row.beta);
          });
      std::cout << "wrote " << (std::filesystem::path(train_out) / "final.ckpt")
                << " after " << result.metrics.size() << " iterations\n";
    } else if (serve_cmd->parsed()) {
      std::vector<afr::CheckpointBundle> bundles;
      for (const auto& path : serve_checkpoints)
        bundles.push_back(afr::LoadCheckpoint(path));
      const auto [host, port] = afr::ParseBindAddress(bind);
      afr::DecisionService service(std::move(bundles));
      g_service = &service;
      std::signal(SIGINT, StopOnSignal);
      std::signal(SIGTERM, StopOnSignal);
      std::fprintf(stderr, "serving on %s:%d\n", host.c_str(), port);
      service.Listen(host, port);
      g_service = nullptr;
    } else if (eval_cmd->parsed()) {
      const auto bundle = afr::LoadCheckpoint(eval_checkpoint);
      const auto dataset = afr::LoadDataset(eval_dataset);
      const afr::QoEProfile profile = afr::ResolveProfile(eval_profile);
      std::optional<std::vector<double>> cuts;
      if (!eval_thresholds.empty()) cuts = ParseDoubles(eval_thresholds);
      const auto report = afr::Evaluate(bundle, dataset, profile, cuts);
      std::cout << afr::ReportTable(report);
      if (!eval_out.empty()) WriteText(eval_out, afr::ReportCsv(report));
    } else if (baseline_cmd->parsed()) {
      const afr::VideoTrace trace = afr::LoadTrace(baseline_trace);
      std::vector<int> levels;
      if (baseline_kind == "naive") {
        levels = afr::NaiveBaseline(
            trace, baseline_arg.empty() ? 0.6 : std::stod(baseline_arg));
      } else {
        const std::vector<double> cuts =
            baseline_arg.empty()
                ? afr::DefaultEvsoThresholds(std::span(&trace, 1),
                                             trace.level_count())
                : ParseDoubles(baseline_arg);
        levels = afr::EvsoBaseline(trace, cuts);
      }
      for (std::size_t i = 0; i < levels.size(); ++i)
        std::cout << (i ? "," : "") << levels[i];
      std::cout << "\n";
    }
  } catch (const afr::Error& e) {
    std::fprintf(stderr, "afr: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "afr: %s\n", e.what());
    return 2;
  }
  return 0;
}
