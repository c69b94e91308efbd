#include "afr/reward.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "afr/errors.h"

namespace afr {

QoEProfile QoEProfile::QualityFirst() {
  return {.name = "qoe_q",
          .mu1 = 7.0,
          .mu2 = 2.5,
          .mu3 = 14.0,
          .bonus_threshold = 98.0,
          .bonus_value = 5.0,
          .penalty_threshold = 90.0,
          .penalty_value = 15.0};
}

QoEProfile QoEProfile::BatteryFirst() {
  return {.name = "qoe_b",
          .mu1 = 4.0,
          .mu2 = 2.0,
          .mu3 = 17.0,
          .bonus_threshold = 98.0,
          .bonus_value = 2.0,
          .penalty_threshold = 85.0,
          .penalty_value = 15.0};
}

void ValidateProfile(const QoEProfile& p) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(p.mu1) || !finite(p.mu2) || !finite(p.mu3) || p.mu1 < 0 ||
      p.mu2 < 0 || p.mu3 < 0)
    throw InvalidProfile(p.name + ": mu1, mu2, mu3 must be finite and >= 0");
  if (!(p.bonus_threshold >= 0 && p.bonus_threshold <= 100) ||
      !(p.penalty_threshold >= 0 && p.penalty_threshold <= 100))
    throw InvalidProfile(p.name + ": thresholds must lie in [0, 100]");
  if (!finite(p.bonus_value) || !finite(p.penalty_value) || p.penalty_value < 0)
    throw InvalidProfile(p.name + ": penalty_value must be finite and >= 0");
}

QoEProfile PresetProfile(std::string_view name) {
  if (name == "qoe_q") return QoEProfile::QualityFirst();
  if (name == "qoe_b") return QoEProfile::BatteryFirst();
  throw InvalidProfile("unknown QoE preset '" + std::string(name) + "'");
}

QoEProfile ResolveProfile(std::string_view name_or_path) {
  if (name_or_path == "qoe_q" || name_or_path == "qoe_b")
    return PresetProfile(name_or_path);
  std::error_code ec;
  if (std::filesystem::is_regular_file(std::filesystem::path(name_or_path), ec))
    return LoadProfile(std::filesystem::path(name_or_path));
  throw InvalidProfile("'" + std::string(name_or_path) +
                       "' is neither a preset nor a profile file");
}

std::string ProfileToJson(const QoEProfile& p) {
  nlohmann::ordered_json j;
  j["name"] = p.name;
  j["mu1"] = p.mu1;
  j["mu2"] = p.mu2;
  j["mu3"] = p.mu3;
  j["bonus_threshold"] = p.bonus_threshold;
  j["bonus_value"] = p.bonus_value;
  j["penalty_threshold"] = p.penalty_threshold;
  j["penalty_value"] = p.penalty_value;
  return j.dump(2) + "\n";
}

QoEProfile ProfileFromJson(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("profile: ") + e.what());
  }
  QoEProfile p;
  try {
    p.name = j.at("name").get<std::string>();
    p.mu1 = j.at("mu1").get<double>();
    p.mu2 = j.at("mu2").get<double>();
    p.mu3 = j.at("mu3").get<double>();
    p.bonus_threshold = j.at("bonus_threshold").get<double>();
    p.bonus_value = j.at("bonus_value").get<double>();
    p.penalty_threshold = j.at("penalty_threshold").get<double>();
    p.penalty_value = j.at("penalty_value").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("profile: ") + e.what());
  }
  ValidateProfile(p);
  return p;
}

QoEProfile LoadProfile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return ProfileFromJson(buffer.str());
}

RewardBreakdown ChunkReward(const ChunkRecord& chunk, int level,
                            const QoEProfile& profile,
                            const FrameRateLadder& ladder) {
  const int m = static_cast<int>(chunk.quality_by_level.size());
  if (level < 1 || level > m || level > ladder.level_count())
    throw LevelOutOfRange("level " + std::to_string(level) + " outside [1, " +
                          std::to_string(m) + "]");
  const double quality = chunk.quality_by_level[level - 1];

  RewardBreakdown r;
  r.quality_term = quality / 100.0;
  // The lowest level has nothing below it to compare against.
  r.quality_diff_term =
      level > 1 ? (quality - chunk.quality_by_level[level - 2]) / 100.0 : 0.0;
  r.bonus = quality >= profile.bonus_threshold ? profile.bonus_value : 0.0;
  r.penalty = quality < profile.penalty_threshold ? profile.penalty_value : 0.0;
  r.energy_term = ladder.Fps(level) / ladder.original_fps();
  r.total = profile.mu1 * r.quality_term + profile.mu2 * r.quality_diff_term +
            r.bonus - r.penalty - profile.mu3 * r.energy_term;
  return r;
}

double EpisodeReward(const VideoTrace& trace, std::span<const int> levels,
                     const QoEProfile& profile) {
  if (levels.size() != trace.chunks.size())
    throw LengthMismatch("got " + std::to_string(levels.size()) +
                         " levels for " + std::to_string(trace.chunks.size()) +
                         " chunks");
  const FrameRateLadder ladder = FrameRateLadder::ForTrace(trace);
  double total = 0.0;
  for (std::size_t k = 0; k < levels.size(); ++k)
    total += ChunkReward(trace.chunks[k], levels[k], profile, ladder).total;
  return total;
}

std::vector<int> GreedyOracle(const VideoTrace& trace,
                              const QoEProfile& profile) {
  const FrameRateLadder ladder = FrameRateLadder::ForTrace(trace);
  std::vector<int> best_levels;
  best_levels.reserve(trace.chunks.size());
  for (const ChunkRecord& chunk : trace.chunks) {
    int best = 1;
    double best_total = ChunkReward(chunk, 1, profile, ladder).total;
    for (int level = 2; level <= ladder.level_count(); ++level) {
      const double total = ChunkReward(chunk, level, profile, ladder).total;
      if (total > best_total) {  // strict: ties keep the lower level
        best = level;
        best_total = total;
      }
    }
    best_levels.push_back(best);
  }
  return best_levels;
}

}  // namespace afr
