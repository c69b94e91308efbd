#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "afr/errors.h"
#include "afr/reward.h"
#include "afr/trace.h"

using namespace afr;

namespace {

ChunkRecord Chunk(std::vector<double> quality) {
  ChunkRecord c;
  c.frame_diffs = {0.5};
  c.quality_by_level = quality;
  for (std::size_t i = 0; i < quality.size(); ++i)
    c.sizes_by_level.push_back(100 * static_cast<std::int64_t>(i + 1));
  return c;
}

VideoTrace TraceOf(std::vector<ChunkRecord> chunks) {
  VideoTrace t;
  for (std::size_t k = 0; k < chunks.size(); ++k) chunks[k].index = int(k);
  t.chunks = std::move(chunks);
  return t;
}

// Written out from the weight table, independent of the presets.
double TableReward(bool quality_first, double quality, double lower_quality,
                   bool lowest, double fps_ratio) {
  const double mu1 = quality_first ? 7 : 4;
  const double mu2 = quality_first ? 2.5 : 2;
  const double mu3 = quality_first ? 14 : 17;
  const double bonus = quality >= 98 ? (quality_first ? 5 : 2) : 0;
  const double penalty = quality < (quality_first ? 90 : 85) ? 15 : 0;
  const double diff = lowest ? 0.0 : (quality - lower_quality) / 100.0;
  return mu1 * quality / 100.0 + mu2 * diff + bonus - penalty - mu3 * fps_ratio;
}

double BestByEnumeration(const VideoTrace& t, const QoEProfile& p,
                         std::vector<int>& best_levels) {
  const int n = t.chunk_count();
  const int m = t.level_count();
  std::vector<int> levels(n, 1);
  double best = -INFINITY;
  while (true) {
    const double r = EpisodeReward(t, levels, p);
    if (r > best) {
      best = r;
      best_levels = levels;
    }
    int i = 0;
    while (i < n && levels[i] == m) levels[i++] = 1;
    if (i == n) break;
    ++levels[i];
  }
  return best;
}

}  // namespace

TEST_CASE("presets carry the weight table") {
  const QoEProfile q = QoEProfile::QualityFirst();
  CHECK(q.name == "qoe_q");
  CHECK(q.mu1 == 7);
  CHECK(q.mu2 == 2.5);
  CHECK(q.mu3 == 14);
  CHECK(q.bonus_value == 5);
  CHECK(q.bonus_threshold == 98);
  CHECK(q.penalty_value == 15);
  CHECK(q.penalty_threshold == 90);
  const QoEProfile b = QoEProfile::BatteryFirst();
  CHECK(b.name == "qoe_b");
  CHECK(b.mu1 == 4);
  CHECK(b.mu2 == 2);
  CHECK(b.mu3 == 17);
  CHECK(b.bonus_value == 2);
  CHECK(b.bonus_threshold == 98);
  CHECK(b.penalty_value == 15);
  CHECK(b.penalty_threshold == 85);
  CHECK(PresetProfile("qoe_b") == b);
  CHECK_THROWS_AS(PresetProfile("qoe_x"), InvalidProfile);
}

TEST_CASE("quality-first worked example") {
  // Level 2 of 5 is 40% of the original frame rate.
  const ChunkRecord c = Chunk({97.3, 98.5, 99, 99.5, 100});
  const RewardBreakdown r =
      ChunkReward(c, 2, QoEProfile::QualityFirst(), FrameRateLadder(60, 5));
  CHECK(r.quality_term == doctest::Approx(0.985));
  CHECK(r.quality_diff_term == doctest::Approx(0.012));
  CHECK(r.bonus == 5);
  CHECK(r.penalty == 0);
  CHECK(r.energy_term == doctest::Approx(0.4));
  CHECK(r.total == doctest::Approx(6.325).epsilon(1e-12));
}

TEST_CASE("lowest level has no quality gain term") {
  const ChunkRecord c = Chunk({50, 90, 95, 99, 100});
  const RewardBreakdown r =
      ChunkReward(c, 1, QoEProfile::QualityFirst(), FrameRateLadder(60, 5));
  CHECK(r.quality_diff_term == 0.0);
}

TEST_CASE("penalty and bonus thresholds") {
  const FrameRateLadder ladder(60, 5);
  const ChunkRecord c = Chunk({89.9, 90, 97.99, 98, 100});
  const QoEProfile q = QoEProfile::QualityFirst();
  CHECK(ChunkReward(c, 1, q, ladder).penalty == 15);
  CHECK(ChunkReward(c, 2, q, ladder).penalty == 0);
  CHECK(ChunkReward(c, 3, q, ladder).bonus == 0);
  CHECK(ChunkReward(c, 4, q, ladder).bonus == 5);
  const QoEProfile b = QoEProfile::BatteryFirst();
  CHECK(ChunkReward(c, 1, b, ladder).penalty == 0);
  CHECK(ChunkReward(c, 4, b, ladder).bonus == 2);
  CHECK_THROWS_AS(ChunkReward(c, 0, q, ladder), LevelOutOfRange);
  CHECK_THROWS_AS(ChunkReward(c, 6, q, ladder), LevelOutOfRange);
}

TEST_CASE("chunk reward agrees with the weight table on random chunks") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const VideoTrace t = GenerateSynthetic(
        ParseMotionProfile(trial % 2 ? "dynamic" : "static"), 1, rng());
    const ChunkRecord& c = t.chunks[0];
    const FrameRateLadder ladder = FrameRateLadder::ForTrace(t);
    for (bool qf : {true, false}) {
      const QoEProfile p =
          qf ? QoEProfile::QualityFirst() : QoEProfile::BatteryFirst();
      for (int l = 1; l <= 5; ++l) {
        const double lower = l > 1 ? c.quality_by_level[l - 2] : 0.0;
        CHECK(ChunkReward(c, l, p, ladder).total ==
              doctest::Approx(TableReward(qf, c.quality_by_level[l - 1], lower,
                                          l == 1, l / 5.0))
                  .epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("episode reward sums chunk rewards") {
  const VideoTrace t = TraceOf(
      {Chunk({80, 85, 90, 95, 100}), Chunk({99, 99.5, 100, 100, 100}),
       Chunk({60, 70, 86, 92, 100})});
  const QoEProfile b = QoEProfile::BatteryFirst();
  const FrameRateLadder ladder(60, 5);
  const std::vector<int> levels{2, 1, 4};
  double by_hand = 0.0;
  for (int k = 0; k < 3; ++k)
    by_hand += ChunkReward(t.chunks[k], levels[k], b, ladder).total;
  CHECK(EpisodeReward(t, levels, b) == doctest::Approx(by_hand));

  const VideoTrace one = TraceOf({Chunk({80, 85, 90, 95, 100})});
  CHECK(EpisodeReward(one, std::vector<int>{3}, b) ==
        ChunkReward(one.chunks[0], 3, b, ladder).total);

  QoEProfile zero;
  zero.name = "zero";
  CHECK(EpisodeReward(t, levels, zero) == 0.0);
  CHECK_THROWS_AS(EpisodeReward(t, std::vector<int>{1, 2}, b), LengthMismatch);
}

TEST_CASE("oracle picks level 1 for a still chunk under battery-first") {
  int still = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const VideoTrace t = GenerateSynthetic(ParseMotionProfile("static"), 5, seed);
    const std::vector<int> levels = GreedyOracle(t, QoEProfile::BatteryFirst());
    for (int k = 0; k < t.chunk_count(); ++k) {
      if (t.chunks[k].quality_by_level[0] < 98) continue;
      ++still;
      CHECK(levels[k] == 1);
    }
  }
  CHECK(still >= 20);
}

TEST_CASE("oracle climbs to the top level when only it avoids the penalty") {
  const VideoTrace t = TraceOf({Chunk({50, 60, 70, 80, 90})});
  CHECK(GreedyOracle(t, QoEProfile::QualityFirst()) == std::vector<int>{5});
}

TEST_CASE("oracle breaks ties toward the lower level") {
  QoEProfile flat;
  flat.name = "flat";
  const VideoTrace t = TraceOf({Chunk({90, 90, 90, 90, 90})});
  CHECK(GreedyOracle(t, flat) == std::vector<int>{1});
}

TEST_CASE("oracle matches exhaustive enumeration on short traces") {
  for (int n = 1; n <= 4; ++n)
    for (std::uint64_t seed = 1; seed <= 6; ++seed)
      for (const char* kind : {"static", "dynamic", "hybrid:1"})
        for (const QoEProfile& p :
             {QoEProfile::QualityFirst(), QoEProfile::BatteryFirst()}) {
          const VideoTrace t = GenerateSynthetic(ParseMotionProfile(kind), n,
                                                 seed * 31 + n);
          std::vector<int> best_levels;
          const double best = BestByEnumeration(t, p, best_levels);
          const std::vector<int> oracle = GreedyOracle(t, p);
          CHECK(EpisodeReward(t, oracle, p) == best);
          CHECK(oracle == best_levels);
        }
}

TEST_CASE("profile files") {
  const auto path = std::filesystem::temp_directory_path() / "afr_profile.json";
  {
    std::ofstream out(path);
    out << ProfileToJson(QoEProfile::BatteryFirst());
  }
  CHECK(LoadProfile(path) == QoEProfile::BatteryFirst());
  CHECK(ResolveProfile(path.string()) == QoEProfile::BatteryFirst());
  CHECK(ResolveProfile("qoe_q") == QoEProfile::QualityFirst());
  CHECK_THROWS_AS(ResolveProfile("/no/such/profile.json"), InvalidProfile);
  CHECK_THROWS_AS(ProfileFromJson("{\"name\": 3}"), ParseError);

  QoEProfile bad = QoEProfile::QualityFirst();
  bad.mu3 = -1;
  CHECK_THROWS_AS(ValidateProfile(bad), InvalidProfile);
  bad = QoEProfile::QualityFirst();
  bad.penalty_threshold = 120;
  CHECK_THROWS_AS(ValidateProfile(bad), InvalidProfile);
}
