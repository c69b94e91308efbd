#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace afr {

inline constexpr int kDefaultLevelCount = 5;
inline constexpr double kDefaultChunkSeconds = 2.0;

// One fixed-duration segment of a video. Level vectors are indexed by
// frame-rate level in ascending order (level 1 at position 0).
struct ChunkRecord {
  int index = 0;
  // Normalized luma differences in [0,1] between consecutive frames.
  std::vector<double> frame_diffs;
  std::vector<std::int64_t> sizes_by_level;
  // Perceptual quality on a 0..100 scale.
  std::vector<double> quality_by_level;

  double MeanDiff() const;
  double DiffSum() const;

  bool operator==(const ChunkRecord&) const = default;
};

struct VideoTrace {
  std::string video_id;
  int original_fps = 60;
  double chunk_duration_s = kDefaultChunkSeconds;
  std::string category_tag;
  std::vector<ChunkRecord> chunks;

  int chunk_count() const { return static_cast<int>(chunks.size()); }
  // Number of frame-rate levels (m). Zero for an empty trace.
  int level_count() const;

  bool operator==(const VideoTrace&) const = default;
};

// The m frame rates available for a video: original_fps * i / m, i = 1..m.
class FrameRateLadder {
 public:
  FrameRateLadder(double original_fps, int level_count);

  static FrameRateLadder ForTrace(const VideoTrace& trace);

  int level_count() const { return static_cast<int>(levels_.size()); }
  double original_fps() const { return original_fps_; }
  const std::vector<double>& levels() const { return levels_; }
  // 1-based.
  double Fps(int level) const;

 private:
  double original_fps_;
  std::vector<double> levels_;
};

// Throws ValidationError naming the offending field and chunk index.
void ValidateTrace(const VideoTrace& trace);

// Canonical JSON text for a trace (stable key order, 2-space indent).
std::string TraceToJson(const VideoTrace& trace);
// Throws ParseError (with line number) or ValidationError.
VideoTrace TraceFromJson(std::string_view text);

VideoTrace LoadTrace(const std::filesystem::path& path);
void SaveTrace(const VideoTrace& trace, const std::filesystem::path& path);

// All *.json traces in a directory, sorted by file name.
std::vector<VideoTrace> LoadDataset(const std::filesystem::path& dir);

enum class MotionKind { kStatic, kDynamic, kHybrid };

struct MotionProfile {
  MotionKind kind = MotionKind::kStatic;
  // Hybrid only: number of chunks per static/dynamic run.
  int switch_period = 3;
};

// "static", "dynamic", "hybrid" or "hybrid:<period>". Throws InvalidProfile.
MotionProfile ParseMotionProfile(std::string_view name);
std::string MotionProfileName(const MotionProfile& profile);

// Constants of the synthetic quality/size surrogate.
struct SynthModel {
  double quality_scale = 60.0;     // c
  double quality_exponent = 1.2;   // e
  double diff_noise_sigma = 0.05;
  double min_size_fraction = 0.81;
  double static_intensity_lo = 0.02;
  double static_intensity_hi = 0.15;
  double dynamic_intensity_lo = 0.70;
  double dynamic_intensity_hi = 1.00;
};

// Quality of a chunk with motion intensity `intensity` played at
// `fps_ratio` of the original rate: 100 - c * intensity * (1 - ratio)^e.
double SyntheticQuality(double intensity, double fps_ratio,
                        const SynthModel& model = {});

struct SynthOptions {
  int original_fps = 60;
  int level_count = kDefaultLevelCount;
  double chunk_duration_s = kDefaultChunkSeconds;
  SynthModel model;
};

// Deterministic in (profile, n_chunks, seed, options).
VideoTrace GenerateSynthetic(const MotionProfile& profile, int n_chunks,
                             std::uint64_t seed,
                             const SynthOptions& options = {});

// Per-chunk motion intensities the generator draws for these arguments.
std::vector<double> SyntheticIntensities(const MotionProfile& profile,
                                         int n_chunks, std::uint64_t seed,
                                         const SynthModel& model = {});

}  // namespace afr
