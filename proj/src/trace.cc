#include "afr/trace.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "afr/errors.h"

namespace afr {
namespace {

using Json = nlohmann::ordered_json;

constexpr int kSupportedFps[] = {24, 30, 60};

double RoundTo(double value, double scale) {
  return std::round(value * scale) / scale;
}

std::string ChunkContext(std::size_t index) {
  return "chunk " + std::to_string(index);
}

int LineOfOffset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(
                 std::count(text.begin(), text.begin() + offset, '\n'));
}

template <typename T>
T Field(const Json& object, const char* key, const std::string& where) {
  auto it = object.find(key);
  if (it == object.end())
    throw ParseError(where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

double ChunkRecord::MeanDiff() const {
  if (frame_diffs.empty()) return 0.0;
  return DiffSum() / static_cast<double>(frame_diffs.size());
}

double ChunkRecord::DiffSum() const {
  return std::accumulate(frame_diffs.begin(), frame_diffs.end(), 0.0);
}

int VideoTrace::level_count() const {
  return chunks.empty() ? 0
                        : static_cast<int>(chunks.front().quality_by_level.size());
}

FrameRateLadder::FrameRateLadder(double original_fps, int level_count)
    : original_fps_(original_fps) {
  if (level_count < 2)
    throw ValidationError("frame-rate ladder needs at least 2 levels");
  if (!(original_fps > 0))
    throw ValidationError("frame-rate ladder needs a positive original fps");
  levels_.reserve(level_count);
  for (int i = 1; i <= level_count; ++i)
    levels_.push_back(original_fps * i / level_count);
}

FrameRateLadder FrameRateLadder::ForTrace(const VideoTrace& trace) {
  return FrameRateLadder(trace.original_fps, trace.level_count());
}

double FrameRateLadder::Fps(int level) const {
  if (level < 1 || level > level_count())
    throw LevelOutOfRange("level " + std::to_string(level) +
                          " outside [1, " + std::to_string(level_count()) +
                          "]");
  return levels_[level - 1];
}

void ValidateTrace(const VideoTrace& trace) {
  if (trace.chunks.empty())
    throw ValidationError("chunks: trace has no chunks");
  if (std::find(std::begin(kSupportedFps), std::end(kSupportedFps),
                trace.original_fps) == std::end(kSupportedFps))
    throw ValidationError("original_fps: " + std::to_string(trace.original_fps) +
                          " is not one of 24, 30, 60");
  if (!(trace.chunk_duration_s > 0))
    throw ValidationError("chunk_duration_s: must be positive");

  const auto max_diffs = static_cast<std::size_t>(
      std::llround(trace.chunk_duration_s * trace.original_fps) - 1);
  const std::size_t m = trace.chunks.front().quality_by_level.size();
  if (m < 2)
    throw ValidationError(ChunkContext(0) +
                          ": quality_by_level needs at least 2 levels");

  for (std::size_t k = 0; k < trace.chunks.size(); ++k) {
    const ChunkRecord& c = trace.chunks[k];
    const std::string where = ChunkContext(k);
    if (c.index != static_cast<int>(k))
      throw ValidationError(where + ": index is " + std::to_string(c.index));
    if (c.frame_diffs.empty() || c.frame_diffs.size() > max_diffs)
      throw ValidationError(where + ": frame_diffs length " +
                            std::to_string(c.frame_diffs.size()) +
                            " outside [1, " + std::to_string(max_diffs) + "]");
    for (double d : c.frame_diffs)
      if (!(d >= 0.0 && d <= 1.0))
        throw ValidationError(where + ": frame_diffs value outside [0,1]");
    if (c.quality_by_level.size() != m || c.sizes_by_level.size() != m)
      throw ValidationError(where +
                            ": sizes_by_level/quality_by_level length differs "
                            "from level count " + std::to_string(m));
    for (std::size_t i = 0; i < m; ++i) {
      const double q = c.quality_by_level[i];
      if (!(q >= 0.0 && q <= 100.0))
        throw ValidationError(where + ": quality_by_level value outside [0,100]");
      if (c.sizes_by_level[i] < 0)
        throw ValidationError(where + ": sizes_by_level value is negative");
      if (i > 0 && q < c.quality_by_level[i - 1])
        throw ValidationError(where +
                              ": quality_by_level is not non-decreasing");
      if (i > 0 && c.sizes_by_level[i] < c.sizes_by_level[i - 1])
        throw ValidationError(where + ": sizes_by_level is not non-decreasing");
    }
  }
}

std::string TraceToJson(const VideoTrace& trace) {
  Json chunks = Json::array();
  for (const ChunkRecord& c : trace.chunks) {
    Json chunk;
    chunk["index"] = c.index;
    chunk["frame_diffs"] = c.frame_diffs;
    chunk["sizes_by_level"] = c.sizes_by_level;
    chunk["quality_by_level"] = c.quality_by_level;
    chunks.push_back(std::move(chunk));
  }
  Json root;
  root["video_id"] = trace.video_id;
  root["original_fps"] = trace.original_fps;
  root["chunk_duration_s"] = trace.chunk_duration_s;
  root["category_tag"] = trace.category_tag;
  root["chunks"] = std::move(chunks);
  return root.dump(1) + "\n";
}

VideoTrace TraceFromJson(std::string_view text) {
  Json root;
  try {
    root = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("line " + std::to_string(LineOfOffset(text, e.byte)) +
                     ": " + e.what());
  }
  if (!root.is_object()) throw ParseError("line 1: trace must be a JSON object");

  VideoTrace trace;
  trace.video_id = Field<std::string>(root, "video_id", "trace");
  trace.original_fps = Field<int>(root, "original_fps", "trace");
  trace.chunk_duration_s = Field<double>(root, "chunk_duration_s", "trace");
  trace.category_tag = Field<std::string>(root, "category_tag", "trace");
  const Json chunks = Field<Json>(root, "chunks", "trace");
  if (!chunks.is_array()) throw ParseError("trace: 'chunks' must be an array");
  for (std::size_t k = 0; k < chunks.size(); ++k) {
    const std::string where = ChunkContext(k);
    const Json& obj = chunks[k];
    if (!obj.is_object()) throw ParseError(where + ": must be an object");
    ChunkRecord c;
    c.index = Field<int>(obj, "index", where);
    c.frame_diffs = Field<std::vector<double>>(obj, "frame_diffs", where);
    c.sizes_by_level =
        Field<std::vector<std::int64_t>>(obj, "sizes_by_level", where);
    c.quality_by_level =
        Field<std::vector<double>>(obj, "quality_by_level", where);
    trace.chunks.push_back(std::move(c));
  }
  ValidateTrace(trace);
  return trace;
}

VideoTrace LoadTrace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return TraceFromJson(buffer.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void SaveTrace(const VideoTrace& trace, const std::filesystem::path& path) {
  ValidateTrace(trace);
  const std::string text = TraceToJson(trace);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<VideoTrace> LoadDataset(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    throw IoError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<VideoTrace> traces;
  traces.reserve(files.size());
  for (const auto& f : files) traces.push_back(LoadTrace(f));
  return traces;
}

MotionProfile ParseMotionProfile(std::string_view name) {
  if (name == "static") return {MotionKind::kStatic, 0};
  if (name == "dynamic") return {MotionKind::kDynamic, 0};
  if (name == "hybrid") return {MotionKind::kHybrid, 3};
  constexpr std::string_view kHybridPrefix = "hybrid:";
  if (name.starts_with(kHybridPrefix)) {
    const std::string period(name.substr(kHybridPrefix.size()));
    try {
      std::size_t used = 0;
      const int p = std::stoi(period, &used);
      if (used == period.size() && p >= 1) return {MotionKind::kHybrid, p};
    } catch (const std::exception&) {
    }
  }
  throw InvalidProfile("unknown motion profile '" + std::string(name) + "'");
}

std::string MotionProfileName(const MotionProfile& profile) {
  switch (profile.kind) {
    case MotionKind::kStatic:
      return "static";
    case MotionKind::kDynamic:
      return "dynamic";
    case MotionKind::kHybrid:
      return "hybrid";
  }
  return "unknown";
}

double SyntheticQuality(double intensity, double fps_ratio,
                        const SynthModel& model) {
  const double headroom = std::max(0.0, 1.0 - fps_ratio);
  return 100.0 - model.quality_scale * intensity *
                     std::pow(headroom, model.quality_exponent);
}

std::vector<double> SyntheticIntensities(const MotionProfile& profile,
                                         int n_chunks, std::uint64_t seed,
                                         const SynthModel& model) {
  if (n_chunks < 1) throw InvalidProfile("n_chunks must be at least 1");
  if (profile.kind == MotionKind::kHybrid && profile.switch_period < 1)
    throw InvalidProfile("hybrid switch_period must be at least 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> still(model.static_intensity_lo,
                                               model.static_intensity_hi);
  std::uniform_real_distribution<double> moving(model.dynamic_intensity_lo,
                                                model.dynamic_intensity_hi);
  std::vector<double> out;
  out.reserve(n_chunks);
  // Hybrid traces open on a randomly chosen phase.
  const bool hybrid_starts_moving = std::bernoulli_distribution(0.5)(rng);
  for (int k = 0; k < n_chunks; ++k) {
    bool is_moving = profile.kind == MotionKind::kDynamic;
    if (profile.kind == MotionKind::kHybrid)
      is_moving = ((k / profile.switch_period) % 2 == 1) != hybrid_starts_moving;
    out.push_back(is_moving ? moving(rng) : still(rng));
  }
  return out;
}

VideoTrace GenerateSynthetic(const MotionProfile& profile, int n_chunks,
                             std::uint64_t seed, const SynthOptions& options) {
  const std::vector<double> intensity =
      SyntheticIntensities(profile, n_chunks, seed, options.model);
  const FrameRateLadder ladder(options.original_fps, options.level_count);
  const int diff_count = static_cast<int>(std::llround(
                             options.chunk_duration_s * options.original_fps)) -
                         1;
  if (diff_count < 1) throw InvalidProfile("chunk too short for one frame diff");

  // Noise and sizes come from a stream independent of the intensity draw.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> noise(0.0, options.model.diff_noise_sigma);
  std::uniform_real_distribution<double> jitter(0.9, 1.1);

  VideoTrace trace;
  trace.video_id =
      "synth-" + MotionProfileName(profile) + "-" + std::to_string(seed);
  trace.original_fps = options.original_fps;
  trace.chunk_duration_s = options.chunk_duration_s;
  trace.category_tag = MotionProfileName(profile);
  trace.chunks.reserve(n_chunks);

  const double bytes_per_second = 500000.0;
  for (int k = 0; k < n_chunks; ++k) {
    ChunkRecord c;
    c.index = k;
    c.frame_diffs.reserve(diff_count);
    for (int i = 0; i < diff_count; ++i)
      c.frame_diffs.push_back(
          RoundTo(std::clamp(intensity[k] + noise(rng), 0.0, 1.0), 1e6));
    const double base = bytes_per_second * options.chunk_duration_s *
                        (0.3 + 0.7 * intensity[k]) * jitter(rng);
    for (int level = 1; level <= ladder.level_count(); ++level) {
      const double ratio = ladder.Fps(level) / options.original_fps;
      const double quality =
          RoundTo(SyntheticQuality(intensity[k], ratio, options.model), 1e4);
      const double fps_scale =
          options.model.min_size_fraction +
          (1.0 - options.model.min_size_fraction) * ratio;
      c.quality_by_level.push_back(quality);
      c.sizes_by_level.push_back(
          std::llround(base * fps_scale * quality / 100.0));
    }
    trace.chunks.push_back(std::move(c));
  }
  return trace;
}

}  // namespace afr
