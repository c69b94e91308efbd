#include "afr/features.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <string>

#include "afr/errors.h"

namespace afr {
namespace {

void CheckSameShape(const GrayFrame& a, const GrayFrame& b) {
  if (a.width != b.width || a.height != b.height)
    throw DimensionMismatch(
        "frames differ in size: " + std::to_string(a.width) + "x" +
        std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
        std::to_string(b.height));
}

// Skips whitespace and '#' comments in a PGM header.
void SkipPgmFiller(std::istream& in) {
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

int ReadPgmInt(std::istream& in, const std::filesystem::path& path) {
  SkipPgmFiller(in);
  int value = -1;
  if (!(in >> value) || value < 0)
    throw ParseError(path.string() + ": malformed PGM header");
  return value;
}

}  // namespace

GrayFrame::GrayFrame(int w, int h, std::vector<std::uint8_t> data)
    : width(w), height(h), pixels(std::move(data)) {
  if (w < 1 || h < 1 ||
      static_cast<std::size_t>(w) * static_cast<std::size_t>(h) != pixels.size())
    throw DimensionMismatch("frame buffer does not match " + std::to_string(w) +
                            "x" + std::to_string(h));
}

GrayFrame::GrayFrame(int w, int h, std::uint8_t fill)
    : GrayFrame(w, h,
                std::vector<std::uint8_t>(
                    static_cast<std::size_t>(std::max(w, 0)) *
                        static_cast<std::size_t>(std::max(h, 0)),
                    fill)) {}

double YDiff(const GrayFrame& a, const GrayFrame& b) {
  CheckSameShape(a, b);
  if (a.pixels.empty()) throw DimensionMismatch("empty frame");
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i)
    total += static_cast<std::uint64_t>(
        std::abs(static_cast<int>(a.pixels[i]) - static_cast<int>(b.pixels[i])));
  return static_cast<double>(total) /
         (255.0 * static_cast<double>(a.pixels.size()));
}

double Ssim(const GrayFrame& a, const GrayFrame& b) {
  CheckSameShape(a, b);
  const std::size_t n = a.pixels.size();
  if (n < 2) throw DimensionMismatch("SSIM needs at least 2 pixels");
  constexpr double kC1 = (0.01 * 255) * (0.01 * 255);
  constexpr double kC2 = (0.03 * 255) * (0.03 * 255);

  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += a.pixels[i];
    mean_b += b.pixels[i];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);

  double var_a = 0.0, var_b = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a.pixels[i] - mean_a;
    const double db = b.pixels[i] - mean_b;
    var_a += da * da;
    var_b += db * db;
    cov += da * db;
  }
  var_a /= static_cast<double>(n);
  var_b /= static_cast<double>(n);
  cov /= static_cast<double>(n);

  return ((2 * mean_a * mean_b + kC1) * (2 * cov + kC2)) /
         ((mean_a * mean_a + mean_b * mean_b + kC1) * (var_a + var_b + kC2));
}

std::vector<double> ChunkFrameDiffs(std::span<const GrayFrame> frames) {
  if (frames.size() < 2)
    throw DimensionMismatch("need at least 2 frames to compute differences");
  std::vector<double> diffs;
  diffs.reserve(frames.size() - 1);
  for (std::size_t i = 0; i + 1 < frames.size(); ++i)
    diffs.push_back(YDiff(frames[i], frames[i + 1]));
  return diffs;
}

GrayFrame ReadPgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[2] = {};
  if (!in.read(magic, 2) || magic[0] != 'P' || magic[1] != '5')
    throw ParseError(path.string() + ": not a binary PGM (P5)");
  const int width = ReadPgmInt(in, path);
  const int height = ReadPgmInt(in, path);
  const int maxval = ReadPgmInt(in, path);
  if (width < 1 || height < 1 || maxval != 255)
    throw ParseError(path.string() + ": only 8-bit PGM frames are supported");
  in.get();  // single whitespace before raster
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(width) * height);
  if (!in.read(reinterpret_cast<char*>(pixels.data()),
               static_cast<std::streamsize>(pixels.size())))
    throw ParseError(path.string() + ": truncated PGM raster");
  return GrayFrame(width, height, std::move(pixels));
}

void WritePgm(const GrayFrame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << frame.width << " " << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.pixels.data()),
            static_cast<std::streamsize>(frame.pixels.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<GrayFrame> LoadFrameDirectory(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    throw IoError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<GrayFrame> frames;
  frames.reserve(files.size());
  for (const auto& f : files) frames.push_back(ReadPgm(f));
  return frames;
}

double PearsonCorrelation(std::span<const double> x,
                          std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw LengthMismatch("Pearson correlation needs two equal series of >= 2");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::vector<FramePairSample> SyntheticFramePairs(std::uint64_t seed,
                                                 int pair_count, int width,
                                                 int height) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto textured_frame = [&]() {
    const double fx = 0.05 + 0.3 * unit(rng);
    const double fy = 0.05 + 0.3 * unit(rng);
    const double phase = 6.283185307179586 * unit(rng);
    const double offset = 60.0 + 120.0 * unit(rng);
    std::vector<std::uint8_t> px(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double v = offset +
                         50.0 * std::sin(fx * x + phase) * std::cos(fy * y) +
                         10.0 * gauss(rng);
        px[static_cast<std::size_t>(y) * width + x] =
            static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    return GrayFrame(width, height, std::move(px));
  };

  std::vector<FramePairSample> out;
  out.reserve(pair_count);
  for (int i = 0; i < pair_count; ++i) {
    const GrayFrame base = textured_frame();
    // Perturbation: horizontal motion plus sensor noise, both scaled by s.
    const double s = unit(rng);
    const int shift = static_cast<int>(std::lround(4.0 * s));
    const double sigma = 40.0 * s;
    std::vector<std::uint8_t> px(base.pixels.size());
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const int src = std::clamp(x - shift, 0, width - 1);
        const double v =
            base.pixels[static_cast<std::size_t>(y) * width + src] +
            sigma * gauss(rng);
        px[static_cast<std::size_t>(y) * width + x] =
            static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    const GrayFrame moved(width, height, std::move(px));
    out.push_back({YDiff(base, moved), Ssim(base, moved)});
  }
  return out;
}

NormalizationStats ComputeNormStats(std::span<const VideoTrace> dataset) {
  if (dataset.empty()) throw EmptyDataset("normalization needs at least one trace");
  std::int64_t largest = 0;
  for (const VideoTrace& t : dataset)
    for (const ChunkRecord& c : t.chunks)
      for (std::int64_t s : c.sizes_by_level) largest = std::max(largest, s);
  NormalizationStats stats;
  stats.max_chunk_size = largest > 0 ? static_cast<double>(largest) : 1.0;
  return stats;
}

int DecileCount(int diff_count) {
  // ceil(0.1 * i) without floating-point surprises.
  return std::min(kDecileLength, (diff_count + 9) / 10);
}

StateObservation BuildObservation(std::span<const double> frame_diffs,
                                  std::span<const double> neighbor_means,
                                  std::span<const std::int64_t> sizes_by_level,
                                  int last_level, int original_fps,
                                  const NormalizationStats& norm) {
  const int m = static_cast<int>(sizes_by_level.size());
  if (frame_diffs.empty() ||
      frame_diffs.size() > static_cast<std::size_t>(kRawDiffLength))
    throw DimensionMismatch("frame_diffs length must be in [1, 120]");
  if (neighbor_means.size() != static_cast<std::size_t>(kNeighborCount))
    throw DimensionMismatch("expected 2 neighbor mean diffs");
  if (m < 2) throw DimensionMismatch("need at least 2 frame-rate levels");
  if (last_level < 1 || last_level > m)
    throw LevelOutOfRange("last_level " + std::to_string(last_level) +
                          " outside [1, " + std::to_string(m) + "]");
  auto unit = [](double v) { return std::clamp(v, 0.0, 1.0); };

  StateObservation obs;
  obs.tau.reserve(kNeighborCount);
  for (double v : neighbor_means) obs.tau.push_back(unit(v));

  obs.p.assign(kRawDiffLength, 0.0);
  for (std::size_t i = 0; i < frame_diffs.size(); ++i)
    obs.p[i] = unit(frame_diffs[i]);
  obs.valid_len_p = static_cast<int>(frame_diffs.size());

  std::vector<double> sorted(obs.p.begin(), obs.p.begin() + obs.valid_len_p);
  std::sort(sorted.begin(), sorted.end());
  const int keep = DecileCount(obs.valid_len_p);
  obs.q.assign(kDecileLength, 0.0);
  obs.m_vec.assign(kDecileLength, 0.0);
  for (int i = 0; i < keep; ++i) {
    obs.q[i] = sorted[sorted.size() - 1 - i];
    obs.m_vec[i] = sorted[i];
  }

  const double scale = norm.max_chunk_size > 0 ? norm.max_chunk_size : 1.0;
  obs.n_vec.reserve(m);
  for (std::int64_t s : sizes_by_level)
    obs.n_vec.push_back(unit(static_cast<double>(s) / scale));

  obs.phi = static_cast<double>(last_level) / m;
  obs.delta = unit(original_fps / kReferenceFps);
  return obs;
}

StateObservation AssembleState(const VideoTrace& trace, int next_chunk_idx,
                               int last_level, const NormalizationStats& norm) {
  if (next_chunk_idx < 0 || next_chunk_idx >= trace.chunk_count())
    throw IndexOutOfRange("chunk index " + std::to_string(next_chunk_idx) +
                          " outside [0, " + std::to_string(trace.chunk_count()) +
                          ")");
  const ChunkRecord& next = trace.chunks[next_chunk_idx];
  const double own = next.MeanDiff();
  const double before =
      next_chunk_idx > 0 ? trace.chunks[next_chunk_idx - 1].MeanDiff() : own;
  const double after = next_chunk_idx + 1 < trace.chunk_count()
                           ? trace.chunks[next_chunk_idx + 1].MeanDiff()
                           : own;
  const double neighbors[kNeighborCount] = {before, after};
  return BuildObservation(next.frame_diffs, neighbors, next.sizes_by_level,
                          last_level, trace.original_fps, norm);
}

}  // namespace afr
