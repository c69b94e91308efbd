#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "afr/errors.h"
#include "afr/trace.h"

namespace fs = std::filesystem;
using namespace afr;

namespace {

VideoTrace MinimalTrace() {
  VideoTrace t;
  t.video_id = "tiny";
  t.original_fps = 60;
  t.category_tag = "news";
  ChunkRecord c;
  c.index = 0;
  c.frame_diffs.assign(119, 0.25);
  c.sizes_by_level = {100, 200, 300, 400, 500};
  c.quality_by_level = {80, 85, 90, 95, 100};
  t.chunks.push_back(c);
  return t;
}

fs::path TempDir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("afr_trace_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string ReadAll(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string WithoutWhitespace(const std::string& s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  return out;
}

}  // namespace

TEST_CASE("frame-rate ladder splits the original rate evenly") {
  FrameRateLadder ladder(60, 5);
  CHECK(ladder.levels() == std::vector<double>{12, 24, 36, 48, 60});
  CHECK(ladder.Fps(1) == 12);
  CHECK(ladder.Fps(5) == 60);
  CHECK_THROWS_AS(ladder.Fps(0), LevelOutOfRange);
  CHECK_THROWS_AS(ladder.Fps(6), LevelOutOfRange);
  FrameRateLadder film(24, 4);
  CHECK(film.levels() == std::vector<double>{6, 12, 18, 24});
}

TEST_CASE("minimal one-chunk trace parses") {
  const VideoTrace t = TraceFromJson(TraceToJson(MinimalTrace()));
  CHECK(t.chunk_count() == 1);
  CHECK(t.level_count() == 5);
  CHECK(t.chunks[0].frame_diffs.size() == 119);
  CHECK(t == MinimalTrace());
}

TEST_CASE("validation names the broken field") {
  SUBCASE("decreasing quality") {
    VideoTrace t = MinimalTrace();
    t.chunks[0].quality_by_level = {90, 85, 86, 95, 100};
    try {
      ValidateTrace(t);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("quality_by_level") != std::string::npos);
    }
  }
  SUBCASE("decreasing sizes") {
    VideoTrace t = MinimalTrace();
    t.chunks[0].sizes_by_level = {100, 90, 300, 400, 500};
    CHECK_THROWS_AS(ValidateTrace(t), ValidationError);
  }
  SUBCASE("too many diffs for the chunk") {
    VideoTrace t = MinimalTrace();
    t.chunks[0].frame_diffs.assign(120, 0.1);
    CHECK_THROWS_AS(ValidateTrace(t), ValidationError);
  }
  SUBCASE("diff outside the unit range") {
    VideoTrace t = MinimalTrace();
    t.chunks[0].frame_diffs[3] = 1.5;
    CHECK_THROWS_AS(ValidateTrace(t), ValidationError);
  }
  SUBCASE("unsupported fps") {
    VideoTrace t = MinimalTrace();
    t.original_fps = 50;
    CHECK_THROWS_AS(ValidateTrace(t), ValidationError);
  }
  SUBCASE("index out of order") {
    VideoTrace t = MinimalTrace();
    t.chunks.push_back(t.chunks[0]);
    CHECK_THROWS_AS(ValidateTrace(t), ValidationError);
    t.chunks[1].index = 1;
    CHECK_NOTHROW(ValidateTrace(t));
  }
  SUBCASE("level vectors of different lengths") {
    VideoTrace t = MinimalTrace();
    t.chunks[0].sizes_by_level.pop_back();
    CHECK_THROWS_AS(ValidateTrace(t), ValidationError);
  }
  SUBCASE("no chunks") {
    VideoTrace t = MinimalTrace();
    t.chunks.clear();
    CHECK_THROWS_AS(ValidateTrace(t), ValidationError);
  }
}

TEST_CASE("malformed json reports a line number") {
  const std::string text = "{\n  \"video_id\": \"x\",\n  \"original_fps\": ,\n}";
  try {
    TraceFromJson(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(TraceFromJson("{\"video_id\": \"x\"}"), ParseError);
  CHECK_THROWS_AS(TraceFromJson("[1, 2]"), ParseError);
}

TEST_CASE("save and load round-trip") {
  const fs::path dir = TempDir("roundtrip");
  for (const char* kind : {"static", "dynamic", "hybrid"}) {
    const VideoTrace t = GenerateSynthetic(ParseMotionProfile(kind), 7, 42);
    const fs::path p = dir / (std::string(kind) + ".json");
    SaveTrace(t, p);
    const VideoTrace back = LoadTrace(p);
    CHECK(back == t);
    const fs::path again = dir / (std::string(kind) + "_again.json");
    SaveTrace(back, again);
    CHECK(ReadAll(p) == ReadAll(again));
  }
  const std::vector<VideoTrace> ds = LoadDataset(dir);
  CHECK(ds.size() == 6);
  CHECK(ds.front().category_tag == "dynamic");
}

TEST_CASE("hand-written file round-trips modulo whitespace") {
  const fs::path dir = TempDir("whitespace");
  const fs::path p = dir / "t.json";
  {
    std::ofstream out(p);
    out << "{\"video_id\":\"w\",\"original_fps\":30,\"chunk_duration_s\":2.0,"
           "\"category_tag\":\"vlog\",\"chunks\":[{\"index\":0,"
           "\"frame_diffs\":[0.1,0.2,0.3],\"sizes_by_level\":[10,20,30],"
           "\"quality_by_level\":[70.5,80.25,100.0]}]}";
  }
  const VideoTrace t = LoadTrace(p);
  SaveTrace(t, dir / "u.json");
  CHECK(WithoutWhitespace(ReadAll(dir / "u.json")) ==
        WithoutWhitespace(TraceToJson(t)));
  CHECK(LoadTrace(dir / "u.json") == t);
}

TEST_CASE("save refuses invalid traces and unwritable paths") {
  VideoTrace empty = MinimalTrace();
  empty.chunks.clear();
  const fs::path dir = TempDir("refuse");
  CHECK_THROWS_AS(SaveTrace(empty, dir / "e.json"), ValidationError);
  CHECK_FALSE(fs::exists(dir / "e.json"));
  CHECK_THROWS_AS(SaveTrace(MinimalTrace(), dir / "missing" / "sub" / "t.json"),
                  IoError);
  CHECK_THROWS_AS(LoadTrace(dir / "nope.json"), IoError);
  CHECK_THROWS_AS(LoadDataset(dir / "nope"), IoError);
}

TEST_CASE("motion profile names") {
  CHECK(ParseMotionProfile("static").kind == MotionKind::kStatic);
  CHECK(ParseMotionProfile("dynamic").kind == MotionKind::kDynamic);
  const MotionProfile h = ParseMotionProfile("hybrid");
  CHECK(h.kind == MotionKind::kHybrid);
  CHECK(h.switch_period == 3);
  CHECK(ParseMotionProfile("hybrid:5").switch_period == 5);
  CHECK_THROWS_AS(ParseMotionProfile("jumpy"), InvalidProfile);
  CHECK_THROWS_AS(ParseMotionProfile("hybrid:0"), InvalidProfile);
  CHECK_THROWS_AS(ParseMotionProfile("hybrid:x"), InvalidProfile);
}

TEST_CASE("synthetic quality surrogate") {
  CHECK(SyntheticQuality(0.5, 1.0) == doctest::Approx(100.0));
  CHECK(SyntheticQuality(0.0, 0.2) == doctest::Approx(100.0));
  // 100 - 60 * 0.7 * 0.8^1.2
  const double expected = 100.0 - 60.0 * 0.7 * std::exp(1.2 * std::log(0.8));
  CHECK(SyntheticQuality(0.7, 0.2) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(67.87).epsilon(1e-3));
}

TEST_CASE("static traces keep top quality") {
  const VideoTrace t = GenerateSynthetic(ParseMotionProfile("static"), 10, 1);
  for (double i : SyntheticIntensities(ParseMotionProfile("static"), 10, 1))
    CHECK(i <= 0.15);
  for (const ChunkRecord& c : t.chunks) CHECK(c.quality_by_level.back() >= 99.0);
  CHECK_NOTHROW(ValidateTrace(t));
}

TEST_CASE("dynamic traces lose quality at the lowest level") {
  const VideoTrace t = GenerateSynthetic(ParseMotionProfile("dynamic"), 10, 1);
  const std::vector<double> iota =
      SyntheticIntensities(ParseMotionProfile("dynamic"), 10, 1);
  const double bound = SyntheticQuality(0.7, 0.2);
  for (int k = 0; k < 10; ++k) {
    CHECK(iota[k] >= 0.7);
    CHECK(t.chunks[k].quality_by_level.front() <= bound + 1e-4);
    CHECK(t.chunks[k].quality_by_level.front() ==
          doctest::Approx(SyntheticQuality(iota[k], 0.2)).epsilon(1e-6));
  }
}

TEST_CASE("hybrid traces alternate runs of the switch period") {
  const MotionProfile h = ParseMotionProfile("hybrid:4");
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const std::vector<double> iota = SyntheticIntensities(h, 16, seed);
    for (int k = 0; k < 16; ++k) {
      const bool moving = iota[k] >= 0.7;
      CHECK(moving == (iota[(k / 4) * 4] >= 0.7));
      if (k >= 4) CHECK(moving != (iota[k - 4] >= 0.7));
    }
  }
}

TEST_CASE("generator is deterministic and seed-sensitive") {
  for (const char* kind : {"static", "dynamic", "hybrid"}) {
    const MotionProfile p = ParseMotionProfile(kind);
    CHECK(GenerateSynthetic(p, 5, 9) == GenerateSynthetic(p, 5, 9));
    CHECK_FALSE(GenerateSynthetic(p, 5, 9) == GenerateSynthetic(p, 5, 10));
  }
}

TEST_CASE("generated traces satisfy every invariant") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    SynthOptions opt;
    opt.original_fps = std::array<int, 3>{24, 30, 60}[trial % 3];
    opt.level_count = 2 + trial % 6;
    const char* kinds[] = {"static", "dynamic", "hybrid:2"};
    const VideoTrace t =
        GenerateSynthetic(ParseMotionProfile(kinds[trial % 3]),
                          1 + static_cast<int>(rng() % 12), rng(), opt);
    CHECK_NOTHROW(ValidateTrace(t));
    CHECK(t.level_count() == opt.level_count);
    CHECK(t.chunks[0].frame_diffs.size() ==
          static_cast<std::size_t>(2 * opt.original_fps - 1));
  }
}

TEST_CASE("chunk summaries") {
  ChunkRecord c;
  c.frame_diffs = {0.1, 0.2, 0.6};
  CHECK(c.DiffSum() == doctest::Approx(0.9));
  CHECK(c.MeanDiff() == doctest::Approx(0.3));
}
