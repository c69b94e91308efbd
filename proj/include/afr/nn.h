#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "afr/features.h"

namespace afr {

enum class HeadKind : std::uint8_t { kActor = 0, kCritic = 1 };

// Shape of an actor or critic network. Each vector input (tau, p, q, m_vec,
// n_vec) goes through its own 1D convolution + ReLU and is flattened; the two
// scalars (phi, delta) go through a dense ReLU layer; the concatenation feeds
// `hidden_layers` dense ReLU layers and a softmax (actor) or linear (critic)
// head. A convolution kernel longer than its input is clamped to the input.
struct NetworkSpec {
  HeadKind head = HeadKind::kActor;
  int m_actions = 5;
  int hidden_layers = 3;
  int hidden_units = 128;
  int filters = 128;
  int kernel = 4;
  int scalar_units = 128;
  std::vector<int> input_lengths = {kNeighborCount, kRawDiffLength,
                                    kDecileLength, kDecileLength, 5};

  int output_size() const { return head == HeadKind::kActor ? m_actions : 1; }
  int conv_kernel(int input) const;
  int conv_positions(int input) const;
  // Width of the concatenated feature vector feeding the first hidden layer.
  int concat_size() const;

  bool operator==(const NetworkSpec&) const = default;
};

inline constexpr int kVectorInputs = 5;
inline constexpr int kScalarInputs = 2;

// Throws InvalidTopology.
void ValidateSpec(const NetworkSpec& spec);

// One weight matrix or bias vector inside the flat parameter array, stored
// column-major.
struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

// Blocks in their fixed order: per vector input conv weight and bias, scalar
// dense weight and bias, hidden weights and biases, head weight and bias.
std::vector<ParamBlock> LayoutFor(const NetworkSpec& spec);

// SIMD-aligned storage so vectorized kernels take the same path on every run.
using AlignedDoubles = std::vector<double, Eigen::aligned_allocator<double>>;

class NetworkParams {
 public:
  // Zero-initialized parameters. Throws InvalidTopology.
  explicit NetworkParams(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::size_t parameter_count() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> block(std::size_t i);
  std::span<const double> block(std::size_t i) const;

  Eigen::Map<const Eigen::MatrixXd> matrix(std::size_t i) const;
  Eigen::Map<Eigen::MatrixXd> matrix(std::size_t i);

  bool operator==(const NetworkParams& other) const {
    return spec_ == other.spec_ && values_ == other.values_;
  }

 private:
  NetworkSpec spec_;
  std::vector<ParamBlock> blocks_;
  AlignedDoubles values_;
};

// Same layout as the parameters they belong to.
struct GradientBlocks {
  NetworkSpec spec;
  AlignedDoubles values;

  static GradientBlocks ZerosLike(const NetworkParams& params);
  GradientBlocks& operator+=(const GradientBlocks& other);
  double Norm() const;
};

// He-uniform weights, zero biases. Throws InvalidTopology.
NetworkParams BuildNetwork(const NetworkSpec& spec, std::uint64_t seed);
NetworkParams BuildNetwork(HeadKind kind, int m_actions, int hidden_layers,
                           int hidden_units, std::uint64_t seed);

// Activations cached by a forward pass; column j belongs to batch item j.
struct ForwardTrace {
  int batch = 0;
  std::vector<Eigen::MatrixXd> patches;   // per input: kernel x (positions*batch)
  std::vector<Eigen::MatrixXd> conv_out;  // per input: filters x (positions*batch)
  Eigen::MatrixXd scalar_in;              // 2 x batch
  Eigen::MatrixXd scalar_out;             // scalar_units x batch
  Eigen::MatrixXd concat;                 // concat_size x batch
  std::vector<Eigen::MatrixXd> hidden;    // hidden_units x batch
  Eigen::MatrixXd output;                 // logits or values
  Eigen::MatrixXd probs;                  // actor only
  Eigen::MatrixXd log_probs;              // actor only
};

// Batched forward over `batch`. Throws ShapeMismatch.
ForwardTrace Forward(const NetworkParams& params,
                     std::span<const StateObservation* const> batch);

struct ActorOutput {
  std::vector<double> probs;
  ForwardTrace trace;
};
struct CriticOutput {
  double value = 0.0;
  ForwardTrace trace;
};

ActorOutput ForwardActor(const NetworkParams& params,
                         const StateObservation& obs);
CriticOutput ForwardCritic(const NetworkParams& params,
                           const StateObservation& obs);

// Gradient of sum_j d_output(:, j) . output(:, j) with respect to the
// parameters, i.e. plain backpropagation of an output-space gradient.
GradientBlocks BackwardFromOutput(const NetworkParams& params,
                                  const ForwardTrace& trace,
                                  const Eigen::MatrixXd& d_output);
// Same, writing into `out` and reusing its storage when the layout matches.
void BackwardFromOutputInto(const NetworkParams& params,
                            const ForwardTrace& trace,
                            const Eigen::MatrixXd& d_output,
                            GradientBlocks& out);

// Output-space gradients behind BackwardActor and BackwardCritic.
Eigen::MatrixXd ActorLogitGradient(const NetworkParams& params,
                                   const ForwardTrace& trace,
                                   std::span<const int> actions,
                                   std::span<const double> advantages,
                                   double beta);
Eigen::MatrixXd CriticValueGradient(const NetworkParams& params,
                                    const ForwardTrace& trace,
                                    std::span<const double> td_targets);

// Ascent-direction gradient of sum_j [A_j log pi(a_j|s_j) + beta H(pi(s_j))].
// Actions are 1-based levels. Throws ShapeMismatch.
GradientBlocks BackwardActor(const NetworkParams& params,
                             const ForwardTrace& trace,
                             std::span<const int> actions,
                             std::span<const double> advantages, double beta);
GradientBlocks BackwardActor(const NetworkParams& params,
                             const ForwardTrace& trace, int action,
                             double advantage, double beta);

// Descent-direction gradient of sum_j (target_j - V(s_j))^2.
GradientBlocks BackwardCritic(const NetworkParams& params,
                              const ForwardTrace& trace,
                              std::span<const double> td_targets);
GradientBlocks BackwardCritic(const NetworkParams& params,
                              const ForwardTrace& trace, double td_target);

enum class StepDirection { kAscent, kDescent };

// params += rate * grads (ascent) or params -= rate * grads (descent).
// Throws ShapeMismatch, or NonFiniteGradient leaving params untouched.
void ApplyGradients(NetworkParams& params, const GradientBlocks& grads,
                    double rate, StepDirection direction);

// Writes `base (+/-) rate * grads` into `out` without touching `base`.
void ApplyGradientsInto(const NetworkParams& base, const GradientBlocks& grads,
                        double rate, StepDirection direction,
                        NetworkParams& out);

// -sum p log p with 0 log 0 = 0.
double Entropy(std::span<const double> probs);

// Softmax of one logit column, max-subtracted.
std::vector<double> Softmax(std::span<const double> logits);

inline constexpr char kCheckpointMagic[4] = {'A', 'F', 'R', '1'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointBundle {
  NetworkParams actor;
  NetworkParams critic;
  NormalizationStats norm;
  std::string profile_name;
};

std::vector<std::uint8_t> SerializeCheckpoint(const CheckpointBundle& bundle);
// Throws CorruptFile or VersionMismatch.
CheckpointBundle DeserializeCheckpoint(std::span<const std::uint8_t> bytes);

void SaveCheckpoint(const CheckpointBundle& bundle,
                    const std::filesystem::path& path);
CheckpointBundle LoadCheckpoint(const std::filesystem::path& path);

}  // namespace afr
