#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "afr/errors.h"
#include "afr/nn.h"
#include "gradcheck.h"

using namespace afr;
using afr::testing::RandomObservation;
using afr::testing::RandomSmallProblem;

namespace {

std::size_t ClosedFormCount(int m, int layers, int units, int filters,
                            int kernel, int scalar_units, bool actor) {
  const int lengths[] = {2, 120, 12, 12, m};
  std::size_t count = 0;
  std::size_t concat = scalar_units;
  for (int len : lengths) {
    const int k = std::min(kernel, len);
    count += static_cast<std::size_t>(filters) * k + filters;
    concat += static_cast<std::size_t>(filters) * (len - k + 1);
  }
  count += 2 * scalar_units + scalar_units;
  std::size_t fan_in = concat;
  for (int l = 0; l < layers; ++l) {
    count += fan_in * units + units;
    fan_in = units;
  }
  const int out = actor ? m : 1;
  count += static_cast<std::size_t>(units) * out + out;
  return count;
}

StateObservation DefaultObservation(std::uint64_t seed) {
  NetworkSpec spec;
  std::mt19937_64 rng(seed);
  return RandomObservation(spec, rng);
}

void ZeroHead(NetworkParams& params) {
  const std::size_t n = params.blocks().size();
  for (std::size_t b = n - 2; b < n; ++b)
    for (double& v : params.block(b)) v = 0.0;
}

}  // namespace

TEST_CASE("parameter count follows the topology arithmetic") {
  const NetworkParams actor = BuildNetwork(HeadKind::kActor, 5, 3, 128, 1);
  CHECK(actor.parameter_count() == ClosedFormCount(5, 3, 128, 128, 4, 128, true));
  const NetworkParams critic = BuildNetwork(HeadKind::kCritic, 5, 3, 128, 1);
  CHECK(critic.parameter_count() ==
        ClosedFormCount(5, 3, 128, 128, 4, 128, false));
  CHECK(actor.spec().concat_size() == 128 * (1 + 117 + 9 + 9 + 2) + 128);
  const NetworkParams wide = BuildNetwork(HeadKind::kActor, 7, 2, 64, 3);
  CHECK(wide.parameter_count() == ClosedFormCount(7, 2, 64, 128, 4, 128, true));
}

TEST_CASE("topology errors") {
  CHECK_THROWS_AS(BuildNetwork(HeadKind::kActor, 5, 0, 128, 1), InvalidTopology);
  CHECK_THROWS_AS(BuildNetwork(HeadKind::kActor, 1, 3, 128, 1), InvalidTopology);
  CHECK_THROWS_AS(BuildNetwork(HeadKind::kActor, 5, 3, 0, 1), InvalidTopology);
}

TEST_CASE("same seed gives identical parameters") {
  const NetworkParams a = BuildNetwork(HeadKind::kActor, 5, 3, 128, 42);
  const NetworkParams b = BuildNetwork(HeadKind::kActor, 5, 3, 128, 42);
  CHECK(a == b);
  CHECK_FALSE(a == BuildNetwork(HeadKind::kActor, 5, 3, 128, 43));
}

TEST_CASE("he-uniform bounds and zero biases") {
  const NetworkParams a = BuildNetwork(HeadKind::kCritic, 5, 2, 16, 7);
  for (std::size_t i = 0; i < a.blocks().size(); ++i) {
    const ParamBlock& b = a.blocks()[i];
    const double limit = std::sqrt(6.0 / b.cols);
    for (double v : a.block(i)) {
      if (b.name.ends_with(".bias"))
        CHECK(v == 0.0);
      else
        CHECK(std::fabs(v) <= limit);
    }
  }
}

TEST_CASE("actor output is a distribution") {
  const NetworkParams actor = BuildNetwork(HeadKind::kActor, 5, 3, 128, 3);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const ActorOutput out = ForwardActor(actor, DefaultObservation(s));
    double sum = 0.0;
    for (double p : out.probs) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
    CHECK(out.probs == ForwardActor(actor, DefaultObservation(s)).probs);
  }
}

TEST_CASE("zeroed head gives uniform policy and zero value") {
  NetworkParams actor = BuildNetwork(HeadKind::kActor, 5, 3, 32, 3);
  ZeroHead(actor);
  for (double p : ForwardActor(actor, DefaultObservation(1)).probs)
    CHECK(p == doctest::Approx(0.2).epsilon(1e-15));
  NetworkParams critic = BuildNetwork(HeadKind::kCritic, 5, 3, 32, 3);
  ZeroHead(critic);
  CHECK(ForwardCritic(critic, DefaultObservation(1)).value == 0.0);
}

TEST_CASE("softmax is stable for extreme logits") {
  const std::vector<double> big{1000.0, -1000.0, 999.0, 0.0};
  const std::vector<double> p = Softmax(big);
  double sum = 0.0;
  for (double v : p) {
    CHECK(std::isfinite(v));
    sum += v;
  }
  CHECK(std::fabs(sum - 1.0) <= 1e-12);
  CHECK(p[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("shape mismatches are reported") {
  const NetworkParams actor = BuildNetwork(HeadKind::kActor, 5, 1, 8, 3);
  StateObservation obs = DefaultObservation(1);
  obs.n_vec.pop_back();
  CHECK_THROWS_AS(ForwardActor(actor, obs), ShapeMismatch);
  const NetworkParams critic = BuildNetwork(HeadKind::kCritic, 5, 1, 8, 3);
  CHECK_THROWS_AS(ForwardActor(critic, DefaultObservation(1)), ShapeMismatch);
  CHECK_THROWS_AS(ForwardCritic(actor, DefaultObservation(1)), ShapeMismatch);
}

TEST_CASE("entropy values") {
  CHECK(Entropy(std::vector<double>(5, 0.2)) == doctest::Approx(std::log(5.0)));
  CHECK(Entropy(std::vector<double>{0, 0, 1, 0, 0}) == 0.0);
  CHECK(Entropy(std::vector<double>{0.5, 0.5, 0, 0, 0}) ==
        doctest::Approx(std::log(2.0)));
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> z(5);
    for (double& v : z) v = std::normal_distribution<double>(0, 3)(rng);
    const double h = Entropy(Softmax(z));
    CHECK(h >= 0.0);
    CHECK(h <= std::log(5.0) + 1e-12);
  }
}

TEST_CASE("actor gradient special cases") {
  const NetworkParams actor = BuildNetwork(HeadKind::kActor, 5, 2, 16, 9);
  const StateObservation obs = DefaultObservation(4);
  const ActorOutput out = ForwardActor(actor, obs);
  const GradientBlocks none = BackwardActor(actor, out.trace, 2, 0.0, 0.0);
  CHECK(none.Norm() == 0.0);

  // With beta = 0 and unit advantage the gradient is grad log pi(a|s).
  const GradientBlocks g = BackwardActor(actor, out.trace, 3, 1.0, 0.0);
  Eigen::MatrixXd d = -Eigen::Map<const Eigen::MatrixXd>(out.probs.data(), 5, 1);
  d(2, 0) += 1.0;
  const GradientBlocks direct = BackwardFromOutput(actor, out.trace, d);
  CHECK(afr::testing::MaxAbsDiff(g.values, direct.values) <= 1e-12);
  CHECK_THROWS_AS(BackwardActor(actor, out.trace, 6, 1.0, 0.0), ShapeMismatch);
}

TEST_CASE("critic gradient special cases") {
  const NetworkParams critic = BuildNetwork(HeadKind::kCritic, 5, 2, 16, 9);
  const CriticOutput out = ForwardCritic(critic, DefaultObservation(4));
  CHECK(BackwardCritic(critic, out.trace, out.value).Norm() == 0.0);
  const double n1 = BackwardCritic(critic, out.trace, out.value + 1.5).Norm();
  const double n2 = BackwardCritic(critic, out.trace, out.value + 3.0).Norm();
  CHECK(std::fabs(n2 - 2 * n1) <= 1e-9);
}

TEST_CASE("value responds to a weight nudge as the gradient predicts") {
  NetworkParams critic = BuildNetwork(HeadKind::kCritic, 5, 1, 8, 10);
  const StateObservation obs = DefaultObservation(6);
  const CriticOutput out = ForwardCritic(critic, obs);
  const GradientBlocks dv =
      BackwardFromOutput(critic, out.trace, Eigen::MatrixXd::Ones(1, 1));
  const std::size_t head = critic.blocks()[critic.blocks().size() - 2].offset;
  const double eps = 1e-6;
  critic.values()[head] += eps;
  const double moved = ForwardCritic(critic, obs).value;
  CHECK((moved - out.value) == doctest::Approx(eps * dv.values[head]).epsilon(1e-6));
}

TEST_CASE("analytic gradients match central differences on small nets") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed)
    for (HeadKind head : {HeadKind::kActor, HeadKind::kCritic}) {
      const auto prob = RandomSmallProblem(head, seed);
      CHECK(prob.params.parameter_count() <= 500);
      const GradientBlocks g = afr::testing::AnalyticGradient(prob);
      INFO("seed " << seed);
      CHECK(afr::testing::MaxRelativeError(prob, g) <= 1e-4);
    }
}

TEST_CASE("applying gradients") {
  NetworkParams p = BuildNetwork(HeadKind::kCritic, 5, 1, 4, 2);
  const NetworkParams before = p;
  GradientBlocks g = GradientBlocks::ZerosLike(p);
  for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = 0.001 * (i % 7);

  ApplyGradients(p, g, 0.0, StepDirection::kAscent);
  CHECK(p == before);

  ApplyGradients(p, g, 0.5, StepDirection::kAscent);
  for (std::size_t i = 0; i < g.values.size(); ++i)
    CHECK(p.values()[i] == before.values()[i] + 0.5 * g.values[i]);
  ApplyGradients(p, g, 0.5, StepDirection::kDescent);
  for (std::size_t i = 0; i < g.values.size(); ++i)
    CHECK(p.values()[i] == doctest::Approx(before.values()[i]));

  const NetworkParams snapshot = p;
  g.values[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(ApplyGradients(p, g, 0.1, StepDirection::kAscent),
                  NonFiniteGradient);
  CHECK(p == snapshot);

  const NetworkParams other = BuildNetwork(HeadKind::kCritic, 5, 2, 4, 2);
  CHECK_THROWS_AS(
      ApplyGradients(p, GradientBlocks::ZerosLike(other), 0.1,
                     StepDirection::kAscent),
      ShapeMismatch);
}

TEST_CASE("one descent step reduces a scalar quadratic") {
  // A critic whose only live parameter is the head bias: V = b.
  NetworkParams critic = BuildNetwork(HeadKind::kCritic, 5, 1, 2, 1);
  for (double& v : critic.values()) v = 0.0;
  const StateObservation obs = DefaultObservation(1);
  const double target = 3.0;
  auto loss = [&] {
    const double e = target - ForwardCritic(critic, obs).value;
    return e * e;
  };
  const double before = loss();
  const CriticOutput out = ForwardCritic(critic, obs);
  ApplyGradients(critic, BackwardCritic(critic, out.trace, target), 0.1,
                 StepDirection::kDescent);
  CHECK(loss() < before);
  CHECK(ForwardCritic(critic, obs).value == doctest::Approx(0.6));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  CheckpointBundle bundle{BuildNetwork(HeadKind::kActor, 5, 2, 16, 1),
                          BuildNetwork(HeadKind::kCritic, 5, 2, 16, 2),
                          {123456.0},
                          "qoe_b"};
  const auto path = std::filesystem::temp_directory_path() / "afr_nn_test.ckpt";
  SaveCheckpoint(bundle, path);
  const CheckpointBundle back = LoadCheckpoint(path);
  CHECK(back.actor == bundle.actor);
  CHECK(back.critic == bundle.critic);
  CHECK(back.norm == bundle.norm);
  CHECK(back.profile_name == "qoe_b");
  CHECK(SerializeCheckpoint(back) == SerializeCheckpoint(bundle));

  const VideoTrace t = GenerateSynthetic(ParseMotionProfile("dynamic"), 2, 5);
  CHECK(AssembleState(t, 0, 5, back.norm) == AssembleState(t, 0, 5, bundle.norm));
}

TEST_CASE("damaged checkpoints are rejected") {
  CheckpointBundle bundle{BuildNetwork(HeadKind::kActor, 5, 1, 4, 1),
                          BuildNetwork(HeadKind::kCritic, 5, 1, 4, 2),
                          {10.0},
                          "qoe_q"};
  const std::vector<std::uint8_t> bytes = SerializeCheckpoint(bundle);
  REQUIRE(bytes.size() > 100);

  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 50);
  CHECK_THROWS_AS(DeserializeCheckpoint(truncated), CorruptFile);

  std::vector<std::uint8_t> flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x40;
  CHECK_THROWS_AS(DeserializeCheckpoint(flipped), CorruptFile);

  std::vector<std::uint8_t> versioned = bytes;
  versioned[4] = 9;
  CHECK_THROWS_AS(DeserializeCheckpoint(versioned), VersionMismatch);

  std::vector<std::uint8_t> magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(DeserializeCheckpoint(magic), CorruptFile);

  CHECK_THROWS_AS(LoadCheckpoint("/nonexistent/afr.ckpt"), CheckpointMissing);
}
