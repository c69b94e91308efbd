#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "afr/trace.h"

namespace afr {

// Fixed input shapes of the policy networks.
inline constexpr int kNeighborCount = 2;    // chunks before and after
inline constexpr int kRawDiffLength = 120;  // 2 s at 60 fps
inline constexpr int kDecileLength = 12;
inline constexpr double kReferenceFps = 60.0;

struct GrayFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major luma

  GrayFrame() = default;
  GrayFrame(int w, int h, std::vector<std::uint8_t> data);
  GrayFrame(int w, int h, std::uint8_t fill);
};

// Mean absolute luma difference divided by 255. Throws DimensionMismatch.
double YDiff(const GrayFrame& a, const GrayFrame& b);

// Single-window SSIM over the whole frame with the 8-bit constants.
double Ssim(const GrayFrame& a, const GrayFrame& b);

// Luma differences between consecutive frames.
std::vector<double> ChunkFrameDiffs(std::span<const GrayFrame> frames);

// Binary PGM (P5, maxval 255).
GrayFrame ReadPgm(const std::filesystem::path& path);
void WritePgm(const GrayFrame& frame, const std::filesystem::path& path);
// All *.pgm files of a directory in lexicographic order.
std::vector<GrayFrame> LoadFrameDirectory(const std::filesystem::path& dir);

double PearsonCorrelation(std::span<const double> x, std::span<const double> y);

struct FramePairSample {
  double y_diff = 0.0;
  double ssim = 0.0;
};

// Seeded corpus of frame pairs with perturbation strength spread over
// [0,1]: a textured base frame against a shifted, noised copy.
std::vector<FramePairSample> SyntheticFramePairs(std::uint64_t seed,
                                                 int pair_count = 240,
                                                 int width = 64,
                                                 int height = 48);

struct NormalizationStats {
  double max_chunk_size = 1.0;

  bool operator==(const NormalizationStats&) const = default;
};

// Throws EmptyDataset.
NormalizationStats ComputeNormStats(std::span<const VideoTrace> dataset);

// The state fed to the actor and critic. Vector lengths default to the
// fixed shapes above; n_vec has one entry per frame-rate level.
struct StateObservation {
  std::vector<double> tau;    // neighbor-chunk mean diffs
  std::vector<double> p;      // raw diffs of the next chunk, zero-padded
  std::vector<double> q;      // top decile, descending, zero-padded
  std::vector<double> m_vec;  // bottom decile, ascending, zero-padded
  std::vector<double> n_vec;  // normalized sizes per level
  double phi = 0.0;           // last level / m
  double delta = 0.0;         // original fps / 60
  int valid_len_p = 0;

  bool operator==(const StateObservation&) const = default;
};

// Number of entries kept in each decile vector for `diff_count` diffs.
int DecileCount(int diff_count);

// Builds an observation from raw chunk data. `neighbor_means` holds the
// previous and next chunk mean diffs; a missing neighbor is passed as the
// chunk's own mean.
StateObservation BuildObservation(std::span<const double> frame_diffs,
                                  std::span<const double> neighbor_means,
                                  std::span<const std::int64_t> sizes_by_level,
                                  int last_level, int original_fps,
                                  const NormalizationStats& norm);

// Throws IndexOutOfRange for a bad chunk index, LevelOutOfRange for a bad
// last level.
StateObservation AssembleState(const VideoTrace& trace, int next_chunk_idx,
                               int last_level, const NormalizationStats& norm);

}  // namespace afr
