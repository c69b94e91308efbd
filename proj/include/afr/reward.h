#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "afr/trace.h"

namespace afr {

// Weights of the per-chunk QoE reward. Thresholds are on the 0..100 quality
// scale; values are in reward units.
struct QoEProfile {
  std::string name;
  double mu1 = 0.0;  // quality
  double mu2 = 0.0;  // quality gained over the next-lower level
  double mu3 = 0.0;  // energy
  double bonus_threshold = 100.0;
  double bonus_value = 0.0;
  double penalty_threshold = 0.0;
  double penalty_value = 0.0;

  // Quality-first preset.
  static QoEProfile QualityFirst();
  // Battery-first preset.
  static QoEProfile BatteryFirst();

  bool operator==(const QoEProfile&) const = default;
};

// Throws InvalidProfile when a weight or threshold is out of range.
void ValidateProfile(const QoEProfile& profile);

// "qoe_q" or "qoe_b". Throws InvalidProfile for other names.
QoEProfile PresetProfile(std::string_view name);
// A preset name, or otherwise a path to a profile JSON file.
QoEProfile ResolveProfile(std::string_view name_or_path);

std::string ProfileToJson(const QoEProfile& profile);
QoEProfile ProfileFromJson(std::string_view text);
QoEProfile LoadProfile(const std::filesystem::path& path);

struct RewardBreakdown {
  double quality_term = 0.0;       // normalized quality, 0..1
  double quality_diff_term = 0.0;  // normalized gain over level - 1
  double bonus = 0.0;
  double penalty = 0.0;
  double energy_term = 0.0;        // chosen fps / original fps
  double total = 0.0;
};

// Throws LevelOutOfRange for a level outside [1, m].
RewardBreakdown ChunkReward(const ChunkRecord& chunk, int level,
                            const QoEProfile& profile,
                            const FrameRateLadder& ladder);

// Throws LengthMismatch when levels.size() differs from the chunk count.
double EpisodeReward(const VideoTrace& trace, std::span<const int> levels,
                     const QoEProfile& profile);

// Per-chunk argmax of the reward; ties go to the lower level. Exact because
// no reward term depends on the actions taken for other chunks.
std::vector<int> GreedyOracle(const VideoTrace& trace,
                              const QoEProfile& profile);

}  // namespace afr
